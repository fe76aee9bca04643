//! Flat key=value training configuration with command-line overrides.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::engine::{Aggregation, EvalMode, Task};
use crate::error::{Error, Result};
use crate::graph::{Direction, EdgeBucketStore};
use crate::sampler::Fanout;

pub const VALID_KEYS: &[&str] = &[
    "task",
    "model",
    "dim",
    "fanouts",
    "direction",
    "lr",
    "negatives",
    "batch_size",
    "epochs",
    "seed",
    "storage",
    "policy",
    "l",
    "c",
    "cpu_bytes",
    "block_bytes",
    "fudge_bytes",
    "eval_mode",
    "eval_every",
    "data_dir",
    "out_dir",
    "prefetch",
    "pipeline",
    "bias_report",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    InMemory,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Comet,
    Beta,
    Nc,
}

impl Policy {
    pub fn from_name(name: &str) -> Result<Policy> {
        match name {
            "comet" => Ok(Policy::Comet),
            "beta" => Ok(Policy::Beta),
            "nc" => Ok(Policy::Nc),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected comet, beta, or nc)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub task: Task,
    pub aggregation: Aggregation,
    /// GNN depth; 0 is the decoder-only model.
    pub layers: usize,
    pub fanouts: Vec<Fanout>,
    pub direction: Direction,
    pub lr: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub storage: Storage,
    pub policy: Policy,
    /// Disk mode: logical partition count and buffer capacity (physical
    /// partitions). None means auto-tune both.
    pub l: Option<u32>,
    pub c: Option<u32>,
    pub cpu_bytes: u64,
    pub block_bytes: u64,
    pub fudge_bytes: u64,
    pub eval_mode: EvalMode,
    /// Evaluate the validation split every this many epochs (0 = never);
    /// the test split is always evaluated after the final epoch.
    pub eval_every: usize,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub prefetch: bool,
    pub pipeline: bool,
    pub bias_report: bool,
    /// Expected embedding dimension; checked against the store.
    pub dim: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::LinkPrediction,
            aggregation: Aggregation::Sage,
            layers: 0,
            fanouts: vec![],
            direction: Direction::Both,
            lr: 0.1,
            negatives: 500,
            batch_size: 1000,
            epochs: 10,
            seed: 0,
            storage: Storage::InMemory,
            policy: Policy::Comet,
            l: None,
            c: None,
            cpu_bytes: 4 << 30,
            block_bytes: 4096,
            fudge_bytes: 256 << 20,
            eval_mode: EvalMode::AllEntities,
            eval_every: 0,
            data_dir: PathBuf::new(),
            out_dir: PathBuf::from("."),
            prefetch: true,
            pipeline: false,
            bias_report: false,
            dim: None,
        }
    }
}

fn parse_model(tok: &str) -> Result<(Aggregation, usize)> {
    if tok == "distmult" {
        return Ok((Aggregation::Sage, 0));
    }
    for (prefix, agg) in [("sage-", Aggregation::Sage), ("additive-", Aggregation::Additive)] {
        if let Some(k) = tok.strip_prefix(prefix) {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad layer count in model {tok:?}")))?;
            if k == 0 {
                return Err(Error::Config("layered models need at least one layer".into()));
            }
            return Ok((agg, k));
        }
    }
    Err(Error::Config(format!(
        "unknown model {tok:?} (expected distmult, sage-K, or additive-K)"
    )))
}

fn parse_bool(key: &str, tok: &str) -> Result<bool> {
    match tok {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key} expects true/false, got {tok:?}"))),
    }
}

impl TrainConfig {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if !VALID_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "unknown key {key:?}; valid keys: {}",
                VALID_KEYS.join(", ")
            )));
        }
        let num = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key} expects an integer, got {v:?}")))
        };
        match key {
            "task" => {
                self.task = match value {
                    "link-prediction" => Task::LinkPrediction,
                    "node-classification" => Task::NodeClassification,
                    other => return Err(Error::Config(format!("unknown task {other:?}"))),
                }
            }
            "model" => {
                let (agg, k) = parse_model(value)?;
                self.aggregation = agg;
                self.layers = k;
            }
            "dim" => self.dim = Some(num(value)? as usize),
            "fanouts" => {
                self.fanouts = value
                    .split(',')
                    .map(|t| Fanout::from_name(t.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "direction" => self.direction = Direction::from_name(value)?,
            "lr" => {
                self.lr = value
                    .parse()
                    .map_err(|_| Error::Config(format!("lr expects a float, got {value:?}")))?;
            }
            "negatives" => self.negatives = num(value)? as usize,
            "batch_size" => self.batch_size = num(value)? as usize,
            "epochs" => self.epochs = num(value)? as usize,
            "seed" => self.seed = num(value)?,
            "storage" => {
                self.storage = match value {
                    "in-memory" => Storage::InMemory,
                    "disk" => Storage::Disk,
                    other => return Err(Error::Config(format!("unknown storage {other:?}"))),
                }
            }
            "policy" => self.policy = Policy::from_name(value)?,
            "l" => self.l = if value == "auto" { None } else { Some(num(value)? as u32) },
            "c" => self.c = if value == "auto" { None } else { Some(num(value)? as u32) },
            "cpu_bytes" => self.cpu_bytes = num(value)?,
            "block_bytes" => self.block_bytes = num(value)?,
            "fudge_bytes" => self.fudge_bytes = num(value)?,
            "eval_mode" => self.eval_mode = EvalMode::from_name(value)?,
            "eval_every" => self.eval_every = num(value)? as usize,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "prefetch" => self.prefetch = parse_bool(key, value)?,
            "pipeline" => self.pipeline = parse_bool(key, value)?,
            "bias_report" => self.bias_report = parse_bool(key, value)?,
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Parse a config file: one key=value per line, '#' comments.
    pub fn from_file(path: &Path) -> Result<TrainConfig> {
        let content = std::fs::read_to_string(path)?;
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}:{}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Apply `key=value` or `--key value` style overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        let mut i = 0;
        while i < overrides.len() {
            let tok = &overrides[i];
            if let Some((key, value)) = tok.split_once('=') {
                self.apply(key.trim_start_matches("--"), value)?;
                i += 1;
            } else if let Some(key) = tok.strip_prefix("--") {
                let value = overrides
                    .get(i + 1)
                    .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
                self.apply(key, value)?;
                i += 2;
            } else {
                return Err(Error::Config(format!(
                    "override {tok:?} is neither key=value nor --key value"
                )));
            }
        }
        Ok(())
    }

    /// Cross-field checks against the opened store.
    pub fn validate(&self, store: &EdgeBucketStore) -> Result<()> {
        if let Some(dim) = self.dim {
            if dim != store.dim {
                return Err(Error::Config(format!(
                    "config dim {} disagrees with the store's {}",
                    dim, store.dim
                )));
            }
        }
        if self.fanouts.len() != self.layers {
            return Err(Error::Config(format!(
                "{} fanouts for a {}-layer model",
                self.fanouts.len(),
                self.layers
            )));
        }
        if self.task == Task::LinkPrediction && self.negatives == 0 {
            return Err(Error::Config("link prediction needs at least one negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.storage == Storage::Disk {
            if let (Some(l), Some(c)) = (self.l, self.c) {
                if l < 2 || l > store.p || store.p % l != 0 {
                    return Err(Error::Config(format!("l={l} must divide p={}", store.p)));
                }
                if self.policy == Policy::Comet {
                    let c_l = (l as u64 * c as u64) / store.p as u64;
                    if (l as u64 * c as u64) % store.p as u64 != 0 || c_l < 2 {
                        return Err(Error::Config(format!(
                            "c={c} is not a whole number of logical partitions (p={}, l={l})",
                            store.p
                        )));
                    }
                }
                if c < 2 || c > store.p {
                    return Err(Error::Config(format!("c={c} out of range for p={}", store.p)));
                }
            }
        }
        Ok(())
    }

    /// Settings as a flat map, for reproducibility logging.
    pub fn describe(&self) -> HashMap<&'static str, String> {
        let mut m = HashMap::new();
        m.insert("seed", self.seed.to_string());
        m.insert("epochs", self.epochs.to_string());
        m.insert("lr", self.lr.to_string());
        m
    }
}
