//! Model checkpoints: a fixed header followed by raw float32 parameter
//! blobs in a deterministic order, so identical models produce identical
//! bytes.
//!
//! Layout (little-endian):
//!   magic "OGNNCKP1"
//!   u32 task (0 = link prediction, 1 = node classification)
//!   u32 aggregation (0 = additive, 1 = sage)
//!   u32 layers, u32 dim, u64 num_nodes, u32 num_relations, u32 num_classes
//!   f32 blobs: node embeddings (num_nodes x dim, node-id order),
//!              relation embeddings, then per layer w_self, w_nbr, bias,
//!              then classifier weights + bias when present.
//! Optimizer accumulators are not part of a checkpoint.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::{Aggregation, ModelConfig, ModelState, SageLayer, Task};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"OGNNCKP1";

pub struct Checkpoint {
    pub model: ModelState,
    /// Flat node-id-order embedding table.
    pub embeddings: Vec<f32>,
}

fn write_f32s(w: &mut impl Write, data: &[f32]) -> Result<()> {
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, model: &ModelState, embeddings: &[f32]) -> Result<()> {
    let cfg = &model.cfg;
    if embeddings.len() != cfg.num_nodes as usize * cfg.dim {
        return Err(Error::InvalidArgument("embedding table size mismatch".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(matches!(cfg.task, Task::NodeClassification) as u32).to_le_bytes())?;
    w.write_all(&(matches!(cfg.aggregation, Aggregation::Sage) as u32).to_le_bytes())?;
    w.write_all(&(cfg.layers as u32).to_le_bytes())?;
    w.write_all(&(cfg.dim as u32).to_le_bytes())?;
    w.write_all(&(cfg.num_nodes as u64).to_le_bytes())?;
    w.write_all(&cfg.num_relations.to_le_bytes())?;
    w.write_all(&cfg.num_classes.to_le_bytes())?;
    write_f32s(&mut w, embeddings)?;
    write_f32s(&mut w, &model.rel_emb.to_f32())?;
    for layer in &model.layers {
        write_f32s(&mut w, &layer.w_self.to_f32())?;
        write_f32s(&mut w, &layer.w_nbr.to_f32())?;
        write_f32s(&mut w, &layer.bias.iter().map(|&v| v as f32).collect::<Vec<_>>())?;
    }
    if let Some((cw, cb)) = &model.classifier {
        write_f32s(&mut w, &cw.to_f32())?;
        write_f32s(&mut w, &cb.iter().map(|&v| v as f32).collect::<Vec<_>>())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32> {
        if self.at + 4 > self.buf.len() {
            return Err(Error::Integrity("checkpoint truncated".into()));
        }
        let v = u32::from_le_bytes(self.buf[self.at..self.at + 4].try_into().unwrap());
        self.at += 4;
        Ok(v)
    }

    fn u64(&mut self) -> Result<u64> {
        if self.at + 8 > self.buf.len() {
            return Err(Error::Integrity("checkpoint truncated".into()));
        }
        let v = u64::from_le_bytes(self.buf[self.at..self.at + 8].try_into().unwrap());
        self.at += 8;
        Ok(v)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        if self.at + n * 4 > self.buf.len() {
            return Err(Error::Integrity("checkpoint truncated".into()));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let at = self.at + i * 4;
            out.push(f32::from_le_bytes(self.buf[at..at + 4].try_into().unwrap()));
        }
        self.at += n * 4;
        Ok(out)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 8 || &buf[0..8] != MAGIC {
        return Err(Error::Integrity("not a checkpoint file".into()));
    }
    let mut cur = Cursor { buf: &buf, at: 8 };
    let task = if cur.u32()? == 1 { Task::NodeClassification } else { Task::LinkPrediction };
    let aggregation = if cur.u32()? == 1 { Aggregation::Sage } else { Aggregation::Additive };
    let layers = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let num_nodes = cur.u64()?;
    let num_relations = cur.u32()?;
    let num_classes = cur.u32()?;
    if num_nodes > u32::MAX as u64 {
        return Err(Error::IdOverflow { id: num_nodes });
    }
    let cfg = ModelConfig {
        task,
        aggregation,
        layers,
        dim,
        num_nodes: num_nodes as u32,
        num_relations,
        num_classes,
    };
    let embeddings = cur.f32s(num_nodes as usize * dim)?;
    let rel_rows = if task == Task::LinkPrediction { num_relations as usize } else { 0 };
    let rel_emb = Matrix::from_f32(rel_rows, dim, &cur.f32s(rel_rows * dim)?);
    let mut layer_params = Vec::with_capacity(layers);
    if aggregation == Aggregation::Sage {
        for _ in 0..layers {
            let w_self = Matrix::from_f32(dim, dim, &cur.f32s(dim * dim)?);
            let w_nbr = Matrix::from_f32(dim, dim, &cur.f32s(dim * dim)?);
            let bias = cur.f32s(dim)?.iter().map(|&v| v as f64).collect();
            layer_params.push(SageLayer { w_self, w_nbr, bias });
        }
    }
    let classifier = if task == Task::NodeClassification {
        let w = Matrix::from_f32(dim, num_classes as usize, &cur.f32s(dim * num_classes as usize)?);
        let b = cur.f32s(num_classes as usize)?.iter().map(|&v| v as f64).collect();
        Some((w, b))
    } else {
        None
    };
    if cur.at != buf.len() {
        return Err(Error::Integrity(format!(
            "checkpoint has {} trailing bytes",
            buf.len() - cur.at
        )));
    }
    let model = ModelState {
        cfg,
        rel_acc: Matrix::zeros(rel_emb.rows, dim),
        rel_emb,
        layers: layer_params,
        classifier,
    };
    Ok(Checkpoint { model, embeddings })
}
