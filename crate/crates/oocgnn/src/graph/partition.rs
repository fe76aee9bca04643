//! Node-to-physical-partition assignment.

use rand::seq::SliceRandom;

use super::{NodeId, RawGraph};
use crate::error::{Error, Result};
use crate::seed::{self, TAG_PARTITION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    /// Uniform balanced random assignment.
    Random,
    /// Training nodes fill partitions 0..k-1 sequentially, the rest of the
    /// graph is spread over the remaining capacity at random.
    TrainFirst,
}

impl AssignMode {
    pub fn from_name(name: &str) -> Result<AssignMode> {
        match name {
            "random" => Ok(AssignMode::Random),
            "train-first" => Ok(AssignMode::TrainFirst),
            other => Err(Error::InvalidArgument(format!(
                "unknown partition mode {other:?} (expected random or train-first)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartitionMap {
    pub p: u32,
    pub node_to_partition: Vec<u32>,
    pub partition_sizes: Vec<u32>,
    /// Number of leading partitions holding the training nodes, when the map
    /// was built in train-first mode.
    pub train_partitions: Option<u32>,
}

impl PartitionMap {
    pub fn partition_of(&self, node: NodeId) -> u32 {
        self.node_to_partition[node as usize]
    }

    /// Node ids of each partition in ascending order. Row order of the
    /// embedding file regions follows this.
    pub fn partition_nodes(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.p as usize];
        for (node, &part) in self.node_to_partition.iter().enumerate() {
            out[part as usize].push(node as NodeId);
        }
        out
    }
}

pub fn assign_partitions(g: &RawGraph, p: u32, mode: AssignMode, seed: u64) -> Result<PartitionMap> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if p > g.num_nodes {
        return Err(Error::InvalidArgument(format!(
            "p={} exceeds the number of nodes ({})",
            p, g.num_nodes
        )));
    }
    let n = g.num_nodes as usize;
    let mut rng = seed::rng(seed, &[TAG_PARTITION]);
    let mut node_to_partition = vec![0u32; n];
    let mut train_partitions = None;

    match mode {
        AssignMode::Random => {
            // A shuffled pool of labels with per-partition counts differing
            // by at most one gives exact balance.
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                labels.push((i % p as usize) as u32);
            }
            labels.shuffle(&mut rng);
            node_to_partition.copy_from_slice(&labels);
        }
        AssignMode::TrainFirst => {
            let train_nodes = g
                .train_nodes()
                .ok_or_else(|| Error::InvalidArgument("train-first mode requires a training node set".into()))?;
            let capacity = (n as u64).div_ceil(p as u64) as usize;
            let k = train_nodes.len().div_ceil(capacity);
            train_partitions = Some(k as u32);
            if k > p as usize {
                return Err(Error::InvalidArgument(format!(
                    "training set of {} nodes does not fit in {} partitions of capacity {}",
                    train_nodes.len(),
                    p,
                    capacity
                )));
            }
            let mut fill = vec![0usize; p as usize];
            let mut is_train = vec![false; n];
            for (i, &node) in train_nodes.iter().enumerate() {
                let part = i / capacity;
                node_to_partition[node as usize] = part as u32;
                fill[part] += 1;
                is_train[node as usize] = true;
            }
            // Remaining capacity as a label pool; the pool can exceed the
            // remaining node count when p does not divide n.
            let mut pool = Vec::new();
            for (part, &used) in fill.iter().enumerate() {
                for _ in used..capacity {
                    pool.push(part as u32);
                }
            }
            pool.shuffle(&mut rng);
            let mut next = 0usize;
            for node in 0..n {
                if !is_train[node] {
                    node_to_partition[node] = pool[next];
                    next += 1;
                }
            }
        }
    }

    let mut partition_sizes = vec![0u32; p as usize];
    for &part in &node_to_partition {
        partition_sizes[part as usize] += 1;
    }
    Ok(PartitionMap { p, node_to_partition, partition_sizes, train_partitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, NodeLabels, Splits};

    fn graph(num_nodes: u32) -> RawGraph {
        RawGraph {
            num_nodes,
            num_relations: 1,
            edges: vec![Edge::new(0, 0, 1)],
            splits: Splits { train: vec![0], ..Splits::default() },
            node_dict: None,
            rel_dict: None,
        }
    }

    #[test]
    fn single_partition_takes_all() {
        let g = graph(5);
        let pm = assign_partitions(&g, 1, AssignMode::Random, 7).unwrap();
        assert!(pm.node_to_partition.iter().all(|&p| p == 0));
        assert_eq!(pm.partition_sizes, vec![5]);
    }

    #[test]
    fn random_assignment_is_balanced() {
        let g = graph(8);
        let pm = assign_partitions(&g, 4, AssignMode::Random, 3).unwrap();
        assert_eq!(pm.partition_sizes, vec![2, 2, 2, 2]);
    }

    #[test]
    fn random_balance_within_one() {
        let g = graph(10);
        let pm = assign_partitions(&g, 4, AssignMode::Random, 3).unwrap();
        let min = *pm.partition_sizes.iter().min().unwrap();
        let max = *pm.partition_sizes.iter().max().unwrap();
        assert!(max - min <= 1, "sizes {:?}", pm.partition_sizes);
    }

    #[test]
    fn train_first_fills_leading_partitions() {
        // 10 nodes, train {0,1,2}, p=5: capacity 2, k=2. Nodes 0,1 land in
        // partition 0 and node 2 in partition 1.
        let mut g = graph(10);
        g.splits.labels = Some(NodeLabels {
            num_classes: 2,
            train: vec![(0, 0), (1, 1), (2, 0)],
            valid: vec![],
            test: vec![],
        });
        let pm = assign_partitions(&g, 5, AssignMode::TrainFirst, 11).unwrap();
        assert_eq!(pm.node_to_partition[0], 0);
        assert_eq!(pm.node_to_partition[1], 0);
        assert_eq!(pm.node_to_partition[2], 1);
        assert_eq!(pm.train_partitions, Some(2));
        // Every partition respects the capacity bound.
        assert!(pm.partition_sizes.iter().all(|&s| s <= 2));
        let total: u32 = pm.partition_sizes.iter().sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn p_larger_than_nodes_is_an_error() {
        let g = graph(3);
        assert!(assign_partitions(&g, 4, AssignMode::Random, 0).is_err());
    }

    #[test]
    fn train_first_without_labels_is_an_error() {
        let g = graph(4);
        assert!(assign_partitions(&g, 2, AssignMode::TrainFirst, 0).is_err());
    }
}
