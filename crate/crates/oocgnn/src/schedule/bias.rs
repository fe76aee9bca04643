//! Edge Permutation Bias: how unevenly an epoch's example sequence spreads
//! each node's incident edges.
//!
//! Cumulative per-node tallies of incident edges are taken after each X_i
//! and normalized so every tracked node ends at 1. The spread d_i is the
//! largest tally difference between two nodes after step i, and the bias B
//! is the largest spread over the epoch. B = 0 means all nodes progress in
//! lockstep; B = 1 means some node finished all its edges before another
//! started.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeBucketStore, NodeId};

#[derive(Debug, Clone, Serialize)]
pub struct BiasReport {
    pub b: f64,
    /// Spread after each example set.
    pub d: Vec<f64>,
    /// Normalized tally of each tracked node after each set (column per
    /// node, row per set); only populated on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<f64>>>,
}

/// Bias of a bucket-set sequence. `x` must assign every nonempty bucket
/// exactly once; zero-degree nodes are not tracked (their normalization is
/// undefined). A self-loop counts as one incident edge.
pub fn edge_permutation_bias(
    x: &[Vec<(u32, u32)>],
    store: &EdgeBucketStore,
    with_trajectories: bool,
) -> Result<BiasReport> {
    let nonempty = store.nonempty_buckets();
    {
        let mut seen = std::collections::HashSet::new();
        for step in x {
            for &b in step {
                if !seen.insert(b) {
                    return Err(Error::ScheduleBug(format!("bucket {b:?} assigned twice")));
                }
            }
        }
        for b in &nonempty {
            if !seen.contains(b) {
                return Err(Error::ScheduleBug(format!("bucket {b:?} never assigned")));
            }
        }
        if seen.len() != nonempty.len() {
            return Err(Error::ScheduleBug("empty or unknown bucket assigned".into()));
        }
    }

    let n = store.num_nodes as usize;
    let mut degree = vec![0u64; n];
    for &(i, j) in &nonempty {
        for e in store.bucket_edges(i, j)? {
            degree[e.src as usize] += 1;
            if e.dst != e.src {
                degree[e.dst as usize] += 1;
            }
        }
    }
    let tracked: Vec<NodeId> =
        (0..store.num_nodes).filter(|&v| degree[v as usize] > 0).collect();
    if tracked.is_empty() {
        return Err(Error::InvalidArgument("graph has no edges to tally".into()));
    }

    let mut tally = vec![0u64; n];
    let mut d = Vec::with_capacity(x.len());
    let mut trajectories = with_trajectories.then(Vec::new);
    let mut b = 0.0f64;
    for step in x {
        for &(i, j) in step {
            for e in store.bucket_edges(i, j)? {
                tally[e.src as usize] += 1;
                if e.dst != e.src {
                    tally[e.dst as usize] += 1;
                }
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &tracked {
            let t = tally[v as usize] as f64 / degree[v as usize] as f64;
            lo = lo.min(t);
            hi = hi.max(t);
        }
        let spread = hi - lo;
        d.push(spread);
        b = b.max(spread);
        if let Some(tr) = trajectories.as_mut() {
            tr.push(
                tracked
                    .iter()
                    .map(|&v| tally[v as usize] as f64 / degree[v as usize] as f64)
                    .collect(),
            );
        }
    }
    Ok(BiasReport { b, d, trajectories })
}

/// Node-example analogue for classification schedules: a node's tally jumps
/// 0 to 1 when its example set runs.
pub fn node_permutation_bias(x: &[Vec<NodeId>], with_trajectories: bool) -> Result<BiasReport> {
    let total: usize = x.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no training nodes in the schedule".into()));
    }
    let mut done = 0usize;
    let mut d = Vec::with_capacity(x.len());
    let mut trajectories = with_trajectories.then(Vec::new);
    let mut b = 0.0f64;
    for step in x {
        done += step.len();
        let spread = if done == 0 || done == total { 0.0 } else { 1.0 };
        d.push(spread);
        b = b.max(spread);
        if let Some(tr) = trajectories.as_mut() {
            let mut row = vec![1.0; done];
            row.extend(vec![0.0; total - done]);
            tr.push(row);
        }
    }
    Ok(BiasReport { b, d, trajectories })
}
