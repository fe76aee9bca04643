//! The epoch loop: for each partition set, shuffle its examples, build mini
//! batches (sample, gather, forward, backward, step, write back), swapping
//! partitions between sets. An epoch consumes every training example exactly
//! once.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::mpsc::sync_channel;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::config::{Policy, Storage, TrainConfig};
use super::dataset::{read_embedding_table, read_eval_edges, read_labels};
use crate::buffer::{BufferOptions, PartitionBuffer};
use crate::engine::{
    backward_and_step, evaluate_lp, evaluate_nc, full_graph_representations, gnn_forward,
    save_checkpoint, Batch, BatchTask, Matrix, ModelConfig, ModelState, Task,
};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeBucketStore, InMemorySubgraph, NodeId, NodeLabels};
use crate::sampler::{multi_hop_sample, DenseSample, SamplerConfig};
use crate::schedule::{
    beta_schedule, comet_assign, comet_schedule, edge_permutation_bias, group_logical,
    nc_schedule, tune_cl, ExampleSet, LogicalGrouping, Schedule,
};
use crate::seed::{self, TAG_NEGATIVES, TAG_SAMPLE, TAG_SHUFFLE};

#[derive(Debug, Clone, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub wall_s: f64,
    pub loss_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub io_bytes: u64,
    pub swap_count: usize,
    pub num_sets: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    pub examples: u64,
}

/// Either kind of training example, post-shuffle.
enum Examples {
    Edges(Vec<Edge>),
    Nodes(Vec<NodeId>),
}

/// A batch prepared off the hot path: the sample plus index-mapped payload.
struct Prepared {
    dense: DenseSample,
    task: BatchTask,
    positives: usize,
}

/// Everything batch preparation needs, detached from the trainer so a
/// sampling stage can run on its own thread.
struct BatchBuilder {
    sub: Arc<InMemorySubgraph>,
    /// Negative-sampling pool: the nodes resident in the active set.
    pool: Arc<Vec<NodeId>>,
    fanouts: Vec<crate::sampler::Fanout>,
    direction: crate::graph::Direction,
    negatives: usize,
    labels: Arc<HashMap<NodeId, u32>>,
    batch_size: usize,
    set_idx: usize,
    epoch_seed: u64,
}

impl BatchBuilder {
    fn prepare(&self, examples: &Examples, b: usize) -> Result<Prepared> {
        let sample_seed =
            seed::derive(self.epoch_seed, &[TAG_SAMPLE, self.set_idx as u64, b as u64]);
        let neg_seed =
            seed::derive(self.epoch_seed, &[TAG_NEGATIVES, self.set_idx as u64, b as u64]);
        let lo = b * self.batch_size;
        match examples {
            Examples::Edges(edges) => {
                let hi = ((b + 1) * self.batch_size).min(edges.len());
                self.prepare_lp(&edges[lo..hi], sample_seed, neg_seed)
            }
            Examples::Nodes(nodes) => {
                let hi = ((b + 1) * self.batch_size).min(nodes.len());
                self.prepare_nc(&nodes[lo..hi], sample_seed)
            }
        }
    }

    fn prepare_lp(&self, edges: &[Edge], sample_seed: u64, neg_seed: u64) -> Result<Prepared> {
        let mut neg_rng = seed::rng(neg_seed, &[]);
        let mut index: HashMap<NodeId, u32> = HashMap::new();
        let mut targets: Vec<NodeId> = Vec::new();
        fn idx_of(
            node: NodeId,
            targets: &mut Vec<NodeId>,
            index: &mut HashMap<NodeId, u32>,
        ) -> u32 {
            *index.entry(node).or_insert_with(|| {
                targets.push(node);
                (targets.len() - 1) as u32
            })
        }
        let mut pos_src = Vec::with_capacity(edges.len());
        let mut pos_rel = Vec::with_capacity(edges.len());
        let mut pos_dst = Vec::with_capacity(edges.len());
        for e in edges {
            pos_src.push(idx_of(e.src, &mut targets, &mut index));
            pos_rel.push(e.rel);
            pos_dst.push(idx_of(e.dst, &mut targets, &mut index));
        }
        let num_negs = self.negatives;
        let mut negs = Vec::with_capacity(edges.len() * num_negs);
        for _ in 0..edges.len() {
            for _ in 0..num_negs {
                let node = self.pool[neg_rng.gen_range(0..self.pool.len())];
                negs.push(idx_of(node, &mut targets, &mut index));
            }
        }
        let dense = multi_hop_sample(
            &self.sub,
            &targets,
            &SamplerConfig {
                fanouts: self.fanouts.clone(),
                direction: self.direction,
                seed: sample_seed,
            },
        )?;
        Ok(Prepared {
            dense,
            task: BatchTask::LinkPrediction { pos_src, pos_rel, pos_dst, negs, num_negs },
            positives: edges.len(),
        })
    }

    fn prepare_nc(&self, nodes: &[NodeId], sample_seed: u64) -> Result<Prepared> {
        let labels: Vec<u32> = nodes
            .iter()
            .map(|n| {
                self.labels
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Train(format!("training node {n} has no label")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dense = multi_hop_sample(
            &self.sub,
            nodes,
            &SamplerConfig {
                fanouts: self.fanouts.clone(),
                direction: self.direction,
                seed: sample_seed,
            },
        )?;
        Ok(Prepared {
            dense,
            task: BatchTask::NodeClassification { labels },
            positives: nodes.len(),
        })
    }
}

pub struct Trainer {
    pub cfg: TrainConfig,
    store: Arc<EdgeBucketStore>,
    buffer: PartitionBuffer,
    pub model: ModelState,
    labels: Option<NodeLabels>,
    label_of: Arc<HashMap<NodeId, u32>>,
    train_nodes: Vec<NodeId>,
    valid_edges: Vec<Edge>,
    test_edges: Vec<Edge>,
    emb_path: PathBuf,
    forced_schedule: Option<Vec<Schedule>>,
    buffer_stats: Option<std::fs::File>,
    /// (l, c, c_l) resolved for disk mode.
    disk_plan: Option<(u32, u32, u32)>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Trainer> {
        let store = Arc::new(EdgeBucketStore::open(&cfg.data_dir)?);
        cfg.validate(&store)?;
        std::fs::create_dir_all(&cfg.out_dir)?;

        // Train on working copies so the preprocessed initialization stays
        // untouched and runs are repeatable.
        let emb_path = cfg.out_dir.join("embeddings.bin");
        let acc_path = cfg.out_dir.join("adagrad.bin");
        std::fs::copy(store.embeddings_path(), &emb_path)?;
        std::fs::copy(store.adagrad_path(), &acc_path)?;

        let labels = read_labels(&cfg.data_dir)?;
        let (valid_edges, test_edges) = read_eval_edges(&cfg.data_dir)?;
        if cfg.task == Task::NodeClassification && labels.is_none() {
            return Err(Error::Config("node classification needs labels.bin in the dataset".into()));
        }

        let disk_plan = match cfg.storage {
            Storage::InMemory => None,
            Storage::Disk => Some(resolve_disk_plan(&cfg, &store)?),
        };
        let capacity = match (cfg.storage, &disk_plan) {
            (Storage::InMemory, _) => store.p,
            (Storage::Disk, Some((_, c, _))) => *c,
            _ => unreachable!(),
        };
        let buffer = PartitionBuffer::with_files(
            Arc::clone(&store),
            BufferOptions::with_capacity(capacity),
            emb_path.clone(),
            acc_path,
        )?;

        let (label_of, train_nodes, num_classes) = match &labels {
            Some(l) => {
                let map: HashMap<NodeId, u32> = l.train.iter().copied().collect();
                let nodes: Vec<NodeId> = l.train.iter().map(|&(n, _)| n).collect();
                (Arc::new(map), nodes, l.num_classes)
            }
            None => (Arc::new(HashMap::new()), Vec::new(), 0),
        };

        let model = ModelState::init(
            ModelConfig {
                task: cfg.task,
                aggregation: cfg.aggregation,
                layers: cfg.layers,
                dim: store.dim,
                num_nodes: store.num_nodes,
                num_relations: store.num_relations,
                num_classes,
            },
            cfg.seed,
        );
        let buffer_stats = Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(cfg.out_dir.join("buffer_stats.jsonl"))?,
        );
        Ok(Trainer {
            cfg,
            store,
            buffer,
            model,
            labels,
            label_of,
            train_nodes,
            valid_edges,
            test_edges,
            emb_path,
            forced_schedule: None,
            buffer_stats,
            disk_plan,
        })
    }

    pub fn store(&self) -> &EdgeBucketStore {
        &self.store
    }

    /// Override the per-epoch schedules (one per epoch); testing hook for
    /// the disk/memory equivalence harness.
    pub fn force_schedules(&mut self, schedules: Vec<Schedule>) {
        self.forced_schedule = Some(schedules);
    }

    /// The schedule this epoch would run (also the forced-schedule source
    /// for equivalence harnesses).
    pub fn epoch_schedule(&self, epoch: usize) -> Result<Schedule> {
        if let Some(forced) = &self.forced_schedule {
            return Ok(forced[epoch % forced.len()].clone());
        }
        let epoch_seed = seed::derive(self.cfg.seed, &[epoch as u64 + 1]);
        match (self.cfg.storage, self.cfg.task) {
            (Storage::InMemory, Task::LinkPrediction) => {
                let grouping = LogicalGrouping::identity(self.store.p);
                let mut buckets = self.store.nonempty_buckets();
                buckets.sort_unstable();
                Ok(Schedule {
                    grouping,
                    sets: vec![(0..self.store.p).collect()],
                    examples: vec![ExampleSet::Buckets(buckets)],
                    swaps: vec![],
                })
            }
            (Storage::InMemory, Task::NodeClassification) => {
                let grouping = LogicalGrouping::identity(self.store.p);
                let mut nodes = self.train_nodes.clone();
                nodes.sort_unstable();
                Ok(Schedule {
                    grouping,
                    sets: vec![(0..self.store.p).collect()],
                    examples: vec![ExampleSet::Nodes(nodes)],
                    swaps: vec![],
                })
            }
            (Storage::Disk, Task::NodeClassification) => {
                let (_, c, _) = self.disk_plan.unwrap();
                nc_schedule(&self.store.partition_map, &self.train_nodes, c, epoch_seed)
            }
            (Storage::Disk, Task::LinkPrediction) => match self.cfg.policy {
                Policy::Beta => {
                    let (_, c, _) = self.disk_plan.unwrap();
                    beta_schedule(self.store.p, c, &self.store, epoch_seed)
                }
                Policy::Comet => {
                    let (l, _, c_l) = self.disk_plan.unwrap();
                    let grouping = group_logical(self.store.p, l, epoch_seed)?;
                    let (sets, swaps) = comet_schedule(&grouping, c_l, epoch_seed)?;
                    let x = comet_assign(&sets, &self.store, &grouping, epoch_seed)?;
                    Ok(Schedule {
                        grouping,
                        sets,
                        examples: x.into_iter().map(ExampleSet::Buckets).collect(),
                        swaps,
                    })
                }
                Policy::Nc => Err(Error::Config(
                    "the nc policy needs task = node-classification".into(),
                )),
            },
        }
    }

    /// One full pass over the training examples.
    pub fn train_epoch(&mut self, epoch: usize) -> Result<EpochMetrics> {
        let started = Instant::now();
        let schedule = self.epoch_schedule(epoch)?;
        let epoch_seed = seed::derive(self.cfg.seed, &[epoch as u64 + 1]);

        let mut io_bytes = 0u64;
        let mut swap_count = 0usize;
        let mut loss_sum = 0.0f64;
        let mut batches = 0u64;
        let mut examples_done = 0u64;

        for i in 0..schedule.num_sets() {
            let stats = self.buffer.load_set(&schedule, i)?;
            io_bytes += stats.bytes_read + stats.bytes_written;
            if stats.evicted.is_some() {
                swap_count += 1;
            }
            if let Some(f) = self.buffer_stats.as_mut() {
                writeln!(f, "{}", serde_json::to_string(&stats).expect("stats serialize"))?;
            }
            if self.cfg.prefetch {
                self.buffer.start_prefetch(&schedule, i + 1);
            }

            let mut examples = match &schedule.examples[i] {
                ExampleSet::Buckets(buckets) => {
                    Examples::Edges(self.bucket_examples(buckets)?)
                }
                ExampleSet::Nodes(nodes) => Examples::Nodes(nodes.clone()),
            };
            // Mini batches draw from this set's examples in random order.
            let mut shuffle_rng = seed::rng(epoch_seed, &[TAG_SHUFFLE, i as u64]);
            match &mut examples {
                Examples::Edges(e) => e.shuffle(&mut shuffle_rng),
                Examples::Nodes(n) => n.shuffle(&mut shuffle_rng),
            }

            let (set_loss, set_batches, set_examples) =
                self.run_set(&schedule, i, epoch_seed, &examples)?;
            loss_sum += set_loss;
            batches += set_batches;
            examples_done += set_examples;
        }
        io_bytes += self.buffer.flush()?;

        let expected: u64 = schedule
            .examples
            .iter()
            .map(|e| match e {
                ExampleSet::Buckets(b) => {
                    b.iter().map(|&(i, j)| self.store.bucket_count(i, j)).sum()
                }
                ExampleSet::Nodes(n) => n.len() as u64,
            })
            .sum();
        if examples_done != expected {
            return Err(Error::Train(format!(
                "epoch consumed {examples_done} examples, schedule carries {expected}"
            )));
        }

        let bias = if self.cfg.bias_report {
            match self.cfg.task {
                Task::LinkPrediction => {
                    let x: Vec<Vec<(u32, u32)>> = schedule
                        .examples
                        .iter()
                        .map(|e| match e {
                            ExampleSet::Buckets(b) => b.clone(),
                            ExampleSet::Nodes(_) => vec![],
                        })
                        .collect();
                    Some(edge_permutation_bias(&x, &self.store, false)?.b)
                }
                Task::NodeClassification => None,
            }
        } else {
            None
        };

        Ok(EpochMetrics {
            epoch,
            wall_s: started.elapsed().as_secs_f64(),
            loss_mean: if batches > 0 { loss_sum / batches as f64 } else { 0.0 },
            mrr: None,
            accuracy: None,
            io_bytes,
            swap_count,
            num_sets: schedule.num_sets(),
            bias,
            examples: examples_done,
        })
    }

    /// Edges of the listed buckets, filtered out of the resident subgraph.
    fn bucket_examples(&self, buckets: &[(u32, u32)]) -> Result<Vec<Edge>> {
        let sub = self.buffer.subgraph()?;
        let wanted: std::collections::HashSet<(u32, u32)> = buckets.iter().copied().collect();
        let pm = &self.store.partition_map;
        Ok(sub
            .edges_by_src()
            .iter()
            .copied()
            .filter(|e| wanted.contains(&(pm.partition_of(e.src), pm.partition_of(e.dst))))
            .collect())
    }

    /// Run all mini batches of one partition set, optionally overlapping
    /// sampling with compute.
    fn run_set(
        &mut self,
        _schedule: &Schedule,
        set_idx: usize,
        epoch_seed: u64,
        examples: &Examples,
    ) -> Result<(f64, u64, u64)> {
        let builder = BatchBuilder {
            sub: self.buffer.subgraph_arc()?,
            pool: Arc::new(self.buffer.subgraph()?.nodes().to_vec()),
            fanouts: self.cfg.fanouts.clone(),
            direction: self.cfg.direction,
            negatives: self.cfg.negatives,
            labels: Arc::clone(&self.label_of),
            batch_size: self.cfg.batch_size,
            set_idx,
            epoch_seed,
        };
        let n_examples = match examples {
            Examples::Edges(e) => e.len(),
            Examples::Nodes(n) => n.len(),
        };
        let n_batches = n_examples.div_ceil(builder.batch_size);

        let mut loss_sum = 0.0;
        let mut batches = 0u64;
        let mut examples_done = 0u64;
        if self.cfg.pipeline && n_batches > 1 {
            // Two-stage pipeline: sampling for batch t+1 overlaps compute
            // for batch t. Gathers stay on this thread, after the previous
            // batch's updates, so results match the sequential path.
            let (tx, rx) = sync_channel::<Result<Prepared>>(2);
            let (l, b, e) = std::thread::scope(|scope| -> Result<(f64, u64, u64)> {
                let builder_ref = &builder;
                scope.spawn(move || {
                    for b in 0..n_batches {
                        if tx.send(builder_ref.prepare(examples, b)).is_err() {
                            break;
                        }
                    }
                });
                let mut loss_sum = 0.0;
                let mut batches = 0u64;
                let mut examples_done = 0u64;
                for _ in 0..n_batches {
                    let prepared =
                        rx.recv().map_err(|_| Error::Train("pipeline hung up".into()))??;
                    let (loss, n) = self.run_batch(prepared)?;
                    loss_sum += loss;
                    batches += 1;
                    examples_done += n;
                }
                Ok((loss_sum, batches, examples_done))
            })?;
            loss_sum = l;
            batches = b;
            examples_done = e;
        } else {
            for b in 0..n_batches {
                let prepared = builder.prepare(examples, b)?;
                let (loss, n) = self.run_batch(prepared)?;
                loss_sum += loss;
                batches += 1;
                examples_done += n;
            }
        }
        Ok((loss_sum, batches, examples_done))
    }

    /// Gather, forward, backward, step, write back.
    fn run_batch(&mut self, mut prepared: Prepared) -> Result<(f64, u64)> {
        let d = self.store.dim;
        prepared.dense.build_repr_map()?;
        let rows = self.buffer.gather(&prepared.dense.node_ids)?;
        let mut h0 = Matrix::zeros(prepared.dense.node_ids.len(), d);
        for (i, v) in rows.iter().enumerate() {
            h0.data[i] = *v as f64;
        }
        let batch = Batch { dense: prepared.dense, h0, task: prepared.task };
        let cache = gnn_forward(&batch.dense, &batch.h0, &self.model)?;
        let (loss, emb_grads) = backward_and_step(&mut self.model, &batch, &cache, self.cfg.lr)?;
        self.buffer.apply_adagrad(&emb_grads, self.cfg.lr)?;
        Ok((loss, prepared.positives as u64))
    }

    /// Representations of all nodes from the current working embeddings,
    /// over the full graph with unlimited fanout.
    fn all_representations(&self) -> Result<Matrix> {
        let table = read_embedding_table(&self.store, &self.emb_path)?;
        let all: Vec<u32> = (0..self.store.p).collect();
        let sub = InMemorySubgraph::load(&self.store, &all)?;
        full_graph_representations(&self.model, &sub, &table, self.cfg.direction)
    }

    /// MRR (link prediction) or accuracy (classification) on a split.
    pub fn evaluate_split(&self, test: bool) -> Result<f64> {
        let reprs = self.all_representations()?;
        match self.cfg.task {
            Task::LinkPrediction => {
                let edges = if test { &self.test_edges } else { &self.valid_edges };
                Ok(evaluate_lp(&reprs, &self.model.rel_emb, edges, self.cfg.eval_mode, self.cfg.seed))
            }
            Task::NodeClassification => {
                let labels = self.labels.as_ref().expect("labels checked at startup");
                let pairs = if test { &labels.test } else { &labels.valid };
                let mut rows = Matrix::zeros(pairs.len(), self.store.dim);
                for (i, &(node, _)) in pairs.iter().enumerate() {
                    rows.row_mut(i).copy_from_slice(reprs.row(node as usize));
                }
                evaluate_nc(&rows, &self.model, pairs)
            }
        }
    }

    /// Run all configured epochs; evaluates the test split after the last
    /// one and writes the checkpoint.
    pub fn train(&mut self) -> Result<Vec<EpochMetrics>> {
        let mut all = Vec::with_capacity(self.cfg.epochs);
        let metrics_path = self.cfg.out_dir.join("metrics.jsonl");
        let mut metrics_file = OpenOptions::new().create(true).append(true).open(&metrics_path)?;
        for epoch in 0..self.cfg.epochs {
            let mut m = self.train_epoch(epoch)?;
            let last = epoch + 1 == self.cfg.epochs;
            let scheduled_eval =
                self.cfg.eval_every > 0 && (epoch + 1) % self.cfg.eval_every == 0 && !last;
            let have_split = match (self.cfg.task, last) {
                (Task::LinkPrediction, true) => !self.test_edges.is_empty(),
                (Task::LinkPrediction, false) => !self.valid_edges.is_empty(),
                (Task::NodeClassification, true) => {
                    self.labels.as_ref().is_some_and(|l| !l.test.is_empty())
                }
                (Task::NodeClassification, false) => {
                    self.labels.as_ref().is_some_and(|l| !l.valid.is_empty())
                }
            };
            if (last || scheduled_eval) && have_split {
                let value = self.evaluate_split(last)?;
                match self.cfg.task {
                    Task::LinkPrediction => m.mrr = Some(value),
                    Task::NodeClassification => m.accuracy = Some(value),
                }
            }
            let line = serde_json::to_string(&m).expect("metrics serialize");
            println!("{line}");
            writeln!(metrics_file, "{line}")?;
            all.push(m);
        }
        let table = read_embedding_table(&self.store, &self.emb_path)?;
        let table_f32: Vec<f32> = table;
        save_checkpoint(&self.cfg.out_dir.join("model.ckpt"), &self.model, &table_f32)?;
        Ok(all)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.cfg.out_dir.join("model.ckpt")
    }
}

/// Resolve (l, c, c_l) for disk mode: explicit settings when given, the
/// auto-tuning rules otherwise.
fn resolve_disk_plan(cfg: &TrainConfig, store: &EdgeBucketStore) -> Result<(u32, u32, u32)> {
    match (cfg.l, cfg.c) {
        (Some(l), Some(c)) => {
            let c_l = ((l as u64 * c as u64) / store.p as u64) as u32;
            Ok((l, c, c_l.max(1)))
        }
        _ => {
            let no = store.num_nodes as u64 * store.dim as u64 * 4;
            let eo = store.num_edges * store.width.bytes_per_edge();
            let plan = tune_cl(store.p, no, eo, cfg.cpu_bytes, cfg.fudge_bytes, store.p as f64)?;
            Ok((plan.l, plan.c, plan.c_l))
        }
    }
}
