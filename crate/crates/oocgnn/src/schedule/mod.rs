//! Per-epoch partition schedules: which partition sets visit memory (S) and
//! which training examples run at each step (X), plus the permutation-bias
//! analyzer and the hyperparameter auto-tuner.

mod autotune;
mod beta;
mod bias;
mod comet;
mod grouping;
mod nc;


pub use autotune::{autotune, io_report, tune_cl, IoReport, PlanMode, TuningPlan};
pub use beta::beta_schedule;
pub use bias::{edge_permutation_bias, node_permutation_bias, BiasReport};
pub use comet::{comet_assign, comet_schedule};
pub use grouping::{group_logical, LogicalGrouping};
pub use nc::nc_schedule;

use crate::graph::NodeId;

/// Training examples attached to one partition set: edge buckets for link
/// prediction, labeled nodes for node classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExampleSet {
    Buckets(Vec<(u32, u32)>),
    Nodes(Vec<NodeId>),
}

impl ExampleSet {
    pub fn len(&self) -> usize {
        match self {
            ExampleSet::Buckets(b) => b.len(),
            ExampleSet::Nodes(n) => n.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The pair (S, X) for one epoch, with the logical grouping that S is
/// expressed in and the per-transition swap (evicted, loaded).
#[derive(Debug, Clone)]
pub struct Schedule {
    pub grouping: LogicalGrouping,
    /// Sorted logical-partition sets, one per step.
    pub sets: Vec<Vec<u32>>,
    pub examples: Vec<ExampleSet>,
    /// (evicted, loaded) logical ids; `swaps.len() == sets.len() - 1`.
    pub swaps: Vec<(u32, u32)>,
}

impl Schedule {
    /// Physical partitions of step `i`, ascending.
    pub fn expanded(&self, i: usize) -> Vec<u32> {
        self.grouping.expand(&self.sets[i])
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn swap_count(&self) -> usize {
        self.swaps.len()
    }
}
