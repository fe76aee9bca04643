//! Forward/backward computation over delta-encoded samples: layer
//! aggregation, the DistMult link decoder, the softmax classifier, losses,
//! optimizer steps, and evaluation metrics.

mod backward;
mod checkpoint;
mod eval;
mod layers;
mod loss;
pub mod matrix;


pub use backward::{backward, backward_and_step, EmbeddingGrad, Gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use eval::{evaluate_lp, evaluate_nc, full_graph_representations, EvalMode};
pub use layers::{gnn_forward, layer_forward_additive, layer_forward_sage, ForwardCache, LayerCache};
pub use loss::{distmult_score, lp_loss, nc_loss};
pub use matrix::Matrix;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::sampler::DenseSample;
use crate::seed::{self, TAG_INIT};

pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    LinkPrediction,
    NodeClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Plain neighbor sum added to the node's own representation; no
    /// learnable layer parameters.
    Additive,
    /// Mean-aggregating layer: ReLU(H_self W_self + mean(nbrs) W_nbr + b),
    /// no activation on the final layer.
    Sage,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub task: Task,
    pub aggregation: Aggregation,
    /// GNN depth; 0 is a decoder-only model on base embeddings.
    pub layers: usize,
    pub dim: usize,
    pub num_nodes: u32,
    pub num_relations: u32,
    /// Node classification only.
    pub num_classes: u32,
}

#[derive(Debug, Clone)]
pub struct SageLayer {
    pub w_self: Matrix,
    pub w_nbr: Matrix,
    pub bias: Vec<f64>,
}

/// Dense model parameters and their optimizer accumulators. Base node
/// embeddings live in the partition buffer (or its backing files), keyed by
/// node id; everything else is small and stays here.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub cfg: ModelConfig,
    /// Relation embeddings for the link decoder; empty for classification.
    pub rel_emb: Matrix,
    pub rel_acc: Matrix,
    pub layers: Vec<SageLayer>,
    /// (weights d x C, bias C) for classification.
    pub classifier: Option<(Matrix, Vec<f64>)>,
}

impl ModelState {
    /// Fresh model: Glorot-uniform layer weights, relation embeddings
    /// uniform in [-0.5/d, 0.5/d], zero accumulators.
    pub fn init(cfg: ModelConfig, base_seed: u64) -> ModelState {
        let d = cfg.dim;
        let mut rng = seed::rng(base_seed, &[TAG_INIT, 1]);
        let glorot = |rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let mut m = Matrix::zeros(rows, cols);
            for v in &mut m.data {
                *v = rng.gen_range(-bound..=bound);
            }
            m
        };
        let mut layers = Vec::new();
        if cfg.aggregation == Aggregation::Sage {
            for _ in 0..cfg.layers {
                layers.push(SageLayer {
                    w_self: glorot(&mut rng, d, d),
                    w_nbr: glorot(&mut rng, d, d),
                    bias: vec![0.0; d],
                });
            }
        }
        let (rel_emb, rel_acc) = match cfg.task {
            Task::LinkPrediction => {
                let bound = 0.5 / d as f64;
                let mut m = Matrix::zeros(cfg.num_relations as usize, d);
                for v in &mut m.data {
                    *v = rng.gen_range(-bound..=bound);
                }
                let acc = Matrix::zeros(cfg.num_relations as usize, d);
                (m, acc)
            }
            Task::NodeClassification => (Matrix::zeros(0, d), Matrix::zeros(0, d)),
        };
        let classifier = match cfg.task {
            Task::NodeClassification => {
                let w = glorot(&mut rng, d, cfg.num_classes as usize);
                Some((w, vec![0.0; cfg.num_classes as usize]))
            }
            Task::LinkPrediction => None,
        };
        ModelState { cfg, rel_emb, rel_acc, layers, classifier }
    }

    pub fn assert_finite(&self) -> Result<()> {
        let ok = self.rel_emb.is_finite()
            && self.layers.iter().all(|l| {
                l.w_self.is_finite() && l.w_nbr.is_finite() && l.bias.iter().all(|v| v.is_finite())
            })
            && self
                .classifier
                .as_ref()
                .map(|(w, b)| w.is_finite() && b.iter().all(|v| v.is_finite()))
                .unwrap_or(true);
        if ok {
            Ok(())
        } else {
            Err(Error::Train("non-finite model parameter".into()))
        }
    }
}

/// Task payload of one mini batch. Node indices refer to rows of the final
/// target representations (the sample's target group, in order).
#[derive(Debug, Clone)]
pub enum BatchTask {
    LinkPrediction {
        pos_src: Vec<u32>,
        pos_rel: Vec<u32>,
        pos_dst: Vec<u32>,
        /// `num_negs` corrupted destinations per positive, row-major.
        negs: Vec<u32>,
        num_negs: usize,
    },
    NodeClassification {
        /// Class label per target.
        labels: Vec<u32>,
    },
}

/// A mini batch ready for the forward pass: the sample, the gathered base
/// representations (row i belongs to `dense.node_ids[i]`), and the task
/// payload.
#[derive(Debug, Clone)]
pub struct Batch {
    pub dense: DenseSample,
    pub h0: Matrix,
    pub task: BatchTask,
}

impl Batch {
    pub fn targets(&self) -> &[NodeId] {
        self.dense.targets()
    }
}
