//! End-to-end training orchestration: schedule, buffer, sampler, engine,
//! metrics.

mod config;
mod dataset;
mod epoch;

#[cfg(test)]
mod tests;

pub use config::{Policy, Storage, TrainConfig, VALID_KEYS};
pub use dataset::{
    preprocess, read_embedding_table, read_eval_edges, read_labels, read_labels_tsv,
    write_eval_edges, write_labels, PartitionCount, PreprocessOptions,
};
pub use epoch::{EpochMetrics, Trainer};

use crate::error::{Error, Result};
use crate::graph::EdgeBucketStore;
use crate::schedule::{
    beta_schedule, comet_assign, comet_schedule, edge_permutation_bias, group_logical,
    nc_schedule, node_permutation_bias, BiasReport, ExampleSet,
};

/// One epoch's edge-permutation bias for a named policy, with the same
/// parameter defaults the CLI uses: c defaults to max(p/4, 2) and comet's l
/// to the smallest divisor of p giving an integral c_l >= 2.
pub fn policy_bias(
    store: &EdgeBucketStore,
    policy: &str,
    seed: u64,
    l: Option<u32>,
    c: Option<u32>,
    trajectories: bool,
) -> Result<BiasReport> {
    let p = store.p;
    let c = c.unwrap_or((p / 4).max(2)).min(p);
    match policy {
        "comet" => {
            let l = match l {
                Some(l) => l,
                None => (2..=p)
                    .find(|&x| p % x == 0 && (x * c) % p == 0 && (x * c) / p >= 2)
                    .unwrap_or(p),
            };
            let grouping = group_logical(p, l, seed)?;
            let c_l = ((l as u64 * c as u64) / p as u64) as u32;
            let (sets, _) = comet_schedule(&grouping, c_l, seed)?;
            let x = comet_assign(&sets, store, &grouping, seed)?;
            edge_permutation_bias(&x, store, trajectories)
        }
        "beta" => {
            let schedule = beta_schedule(p, c, store, seed)?;
            let x: Vec<Vec<(u32, u32)>> = schedule
                .examples
                .iter()
                .map(|e| match e {
                    ExampleSet::Buckets(b) => b.clone(),
                    ExampleSet::Nodes(_) => vec![],
                })
                .collect();
            edge_permutation_bias(&x, store, trajectories)
        }
        "nc" => {
            let labels = read_labels(store.dir())?
                .ok_or_else(|| Error::InvalidArgument("nc bias needs a labeled dataset".into()))?;
            let train_nodes: Vec<u32> = labels.train.iter().map(|&(n, _)| n).collect();
            let schedule = nc_schedule(&store.partition_map, &train_nodes, c, seed)?;
            let x: Vec<Vec<u32>> = schedule
                .examples
                .iter()
                .map(|e| match e {
                    ExampleSet::Nodes(n) => n.clone(),
                    ExampleSet::Buckets(_) => vec![],
                })
                .collect();
            node_permutation_bias(&x, trajectories)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown policy {other:?} (expected comet, beta, or nc)"
        ))),
    }
}
