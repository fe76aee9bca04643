//! In-memory subgraph over a set of resident partitions.
//!
//! Holds two sorted copies of the resident edge list (by source and by
//! destination) plus per-node offset tables, so out- and in-neighbor ranges
//! of any resident node are a single offset lookup. The structure is
//! immutable after construction; partition swaps build a new one (see
//! `apply_swap`, which merges incrementally).

use std::collections::HashSet;

use super::{Edge, EdgeBucketStore, NodeId, PartitionMap, RelId};
use crate::error::{Error, Result};

const NOT_RESIDENT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct InMemorySubgraph {
    pub resident: Vec<u32>,
    /// Resident node ids, ascending; local id = index into this.
    local_nodes: Vec<NodeId>,
    /// Global node id -> local id, NOT_RESIDENT sentinel elsewhere.
    global_to_local: Vec<u32>,
    /// Edges sorted by (src, dst, rel).
    by_src: Vec<Edge>,
    /// Edges sorted by (dst, src, rel).
    by_dst: Vec<Edge>,
    /// Out-edge range starts per local node in `by_src`; len = local+1.
    out_offsets: Vec<u32>,
    /// In-edge range starts per local node in `by_dst`; len = local+1.
    in_offsets: Vec<u32>,
    pub num_nodes: u32,
    pub num_relations: u32,
}

impl InMemorySubgraph {
    /// Build from explicit parts; `edges` may arrive in any order.
    pub fn from_edges(
        num_nodes: u32,
        num_relations: u32,
        pm: &PartitionMap,
        resident: &[u32],
        mut edges: Vec<Edge>,
    ) -> Result<InMemorySubgraph> {
        let resident_set: HashSet<u32> = resident.iter().copied().collect();
        for e in &edges {
            if !resident_set.contains(&pm.partition_of(e.src))
                || !resident_set.contains(&pm.partition_of(e.dst))
            {
                return Err(Error::Integrity(format!(
                    "edge ({}, {}, {}) touches a non-resident partition",
                    e.src, e.rel, e.dst
                )));
            }
        }
        if edges.len() >= u32::MAX as usize {
            return Err(Error::InvalidArgument("resident edge count exceeds u32 range".into()));
        }
        let mut resident_sorted: Vec<u32> = resident.to_vec();
        resident_sorted.sort_unstable();
        resident_sorted.dedup();

        let mut local_nodes: Vec<NodeId> = (0..num_nodes)
            .filter(|&n| resident_set.contains(&pm.partition_of(n)))
            .collect();
        local_nodes.sort_unstable();

        edges.sort_unstable_by_key(|e| (e.src, e.dst, e.rel));
        let by_src = edges;
        let mut by_dst = by_src.clone();
        by_dst.sort_unstable_by_key(|e| (e.dst, e.src, e.rel));

        Self::assemble(num_nodes, num_relations, resident_sorted, local_nodes, by_src, by_dst)
    }

    fn assemble(
        num_nodes: u32,
        num_relations: u32,
        resident: Vec<u32>,
        local_nodes: Vec<NodeId>,
        by_src: Vec<Edge>,
        by_dst: Vec<Edge>,
    ) -> Result<InMemorySubgraph> {
        let mut global_to_local = vec![NOT_RESIDENT; num_nodes as usize];
        for (local, &node) in local_nodes.iter().enumerate() {
            global_to_local[node as usize] = local as u32;
        }
        let nlocal = local_nodes.len();
        let mut out_offsets = vec![0u32; nlocal + 1];
        let mut in_offsets = vec![0u32; nlocal + 1];
        for e in &by_src {
            out_offsets[global_to_local[e.src as usize] as usize + 1] += 1;
        }
        for e in &by_dst {
            in_offsets[global_to_local[e.dst as usize] as usize + 1] += 1;
        }
        for i in 0..nlocal {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        Ok(InMemorySubgraph {
            resident,
            local_nodes,
            global_to_local,
            by_src,
            by_dst,
            out_offsets,
            in_offsets,
            num_nodes,
            num_relations,
        })
    }

    /// Load the union of all pairwise buckets of `partitions` from a store.
    pub fn load(store: &EdgeBucketStore, partitions: &[u32]) -> Result<InMemorySubgraph> {
        let mut parts: Vec<u32> = partitions.to_vec();
        parts.sort_unstable();
        parts.dedup();
        for &q in &parts {
            if q >= store.p {
                return Err(Error::InvalidArgument(format!("partition {q} out of range")));
            }
        }
        let mut edges = Vec::new();
        for &i in &parts {
            for &j in &parts {
                edges.extend(store.bucket_edges(i, j)?);
            }
        }
        InMemorySubgraph::from_edges(store.num_nodes, store.num_relations, &store.partition_map, &parts, edges)
    }

    /// Replace `evicted` partitions with `loaded` ones, reusing the surviving
    /// portion of both sorted arrays. `new_edges` must be exactly the buckets
    /// that become resident (either endpoint in `loaded`, both endpoints in
    /// the new resident set).
    pub fn apply_swap(
        &self,
        pm: &PartitionMap,
        evicted: &[u32],
        loaded: &[u32],
        mut new_edges: Vec<Edge>,
    ) -> Result<InMemorySubgraph> {
        let evicted_set: HashSet<u32> = evicted.iter().copied().collect();
        let mut resident: Vec<u32> = self
            .resident
            .iter()
            .copied()
            .filter(|q| !evicted_set.contains(q))
            .chain(loaded.iter().copied())
            .collect();
        resident.sort_unstable();
        resident.dedup();

        let keep = |e: &Edge| {
            !evicted_set.contains(&pm.partition_of(e.src)) && !evicted_set.contains(&pm.partition_of(e.dst))
        };
        new_edges.sort_unstable_by_key(|e| (e.src, e.dst, e.rel));
        let by_src = merge_sorted(
            self.by_src.iter().copied().filter(keep),
            new_edges.iter().copied(),
            |e| (e.src, e.dst, e.rel),
        );
        new_edges.sort_unstable_by_key(|e| (e.dst, e.src, e.rel));
        let by_dst = merge_sorted(
            self.by_dst.iter().copied().filter(keep),
            new_edges.iter().copied(),
            |e| (e.dst, e.src, e.rel),
        );

        let resident_set: HashSet<u32> = resident.iter().copied().collect();
        let mut local_nodes: Vec<NodeId> = (0..self.num_nodes)
            .filter(|&n| resident_set.contains(&pm.partition_of(n)))
            .collect();
        local_nodes.sort_unstable();
        Self::assemble(self.num_nodes, self.num_relations, resident, local_nodes, by_src, by_dst)
    }

    pub fn local_of(&self, node: NodeId) -> Result<u32> {
        match self.global_to_local.get(node as usize) {
            Some(&l) if l != NOT_RESIDENT => Ok(l),
            _ => Err(Error::NonResidentNode(node as u64)),
        }
    }

    pub fn is_resident(&self, node: NodeId) -> bool {
        matches!(self.global_to_local.get(node as usize), Some(&l) if l != NOT_RESIDENT)
    }

    /// Resident node ids in ascending order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.local_nodes
    }

    pub fn num_resident_edges(&self) -> usize {
        self.by_src.len()
    }

    /// All resident edges sorted by (src, dst, rel).
    pub fn edges_by_src(&self) -> &[Edge] {
        &self.by_src
    }

    /// Outgoing edges of a node: (neighbor, relation) in (dst, rel) order.
    pub fn out_edges(&self, node: NodeId) -> Result<&[Edge]> {
        let l = self.local_of(node)? as usize;
        Ok(&self.by_src[self.out_offsets[l] as usize..self.out_offsets[l + 1] as usize])
    }

    /// Incoming edges of a node in (src, rel) order.
    pub fn in_edges(&self, node: NodeId) -> Result<&[Edge]> {
        let l = self.local_of(node)? as usize;
        Ok(&self.by_dst[self.in_offsets[l] as usize..self.in_offsets[l + 1] as usize])
    }

    pub fn out_degree(&self, node: NodeId) -> Result<usize> {
        Ok(self.out_edges(node)?.len())
    }

    pub fn in_degree(&self, node: NodeId) -> Result<usize> {
        Ok(self.in_edges(node)?.len())
    }

    /// Direction-filtered neighbor list as (neighbor, relation) pairs.
    /// With `Direction::Both`, outgoing neighbors come first and incoming
    /// neighbors carry relation id + num_relations (inverse-relation flag).
    pub fn neighbors(&self, node: NodeId, direction: Direction) -> Result<Vec<(NodeId, RelId)>> {
        let mut out = Vec::new();
        if matches!(direction, Direction::Outgoing | Direction::Both) {
            for e in self.out_edges(node)? {
                out.push((e.dst, e.rel));
            }
        }
        if matches!(direction, Direction::Incoming | Direction::Both) {
            let flag = if direction == Direction::Both { self.num_relations } else { 0 };
            for e in self.in_edges(node)? {
                out.push((e.src, e.rel + flag));
            }
        }
        Ok(out)
    }
}

fn merge_sorted<K: Ord>(
    a: impl Iterator<Item = Edge>,
    b: impl Iterator<Item = Edge>,
    key: impl Fn(&Edge) -> K,
) -> Vec<Edge> {
    let mut a = a.peekable();
    let mut b = b.peekable();
    let mut out = Vec::new();
    loop {
        match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => {
                if key(x) <= key(y) {
                    out.push(a.next().unwrap());
                } else {
                    out.push(b.next().unwrap());
                }
            }
            (Some(_), None) => out.push(a.next().unwrap()),
            (None, Some(_)) => out.push(b.next().unwrap()),
            (None, None) => break,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Incoming,
    Outgoing,
    Both,
}

impl Direction {
    pub fn from_name(name: &str) -> Result<Direction> {
        match name {
            "incoming" => Ok(Direction::Incoming),
            "outgoing" => Ok(Direction::Outgoing),
            "both" => Ok(Direction::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction {other:?} (expected incoming, outgoing, or both)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assign_partitions, AssignMode, BucketStoreOptions, EdgeBucketStore, RawGraph, Splits};
    use crate::synth;

    fn chain() -> (RawGraph, PartitionMap) {
        let g = RawGraph {
            num_nodes: 4,
            num_relations: 1,
            edges: vec![Edge::new(0, 0, 1), Edge::new(1, 0, 2), Edge::new(2, 0, 3)],
            splits: Splits { train: vec![0, 1, 2], ..Splits::default() },
            node_dict: None,
            rel_dict: None,
        };
        let pm = assign_partitions(&g, 1, AssignMode::Random, 0).unwrap();
        (g, pm)
    }

    #[test]
    fn chain_neighbors() {
        let (g, pm) = chain();
        let sub = InMemorySubgraph::from_edges(4, 1, &pm, &[0], g.edges.clone()).unwrap();
        assert_eq!(sub.neighbors(3, Direction::Incoming).unwrap(), vec![(2, 0)]);
        assert_eq!(sub.neighbors(0, Direction::Outgoing).unwrap(), vec![(1, 0)]);
        assert_eq!(sub.neighbors(0, Direction::Incoming).unwrap(), vec![]);
    }

    #[test]
    fn bucket_filtering_excludes_cross_edges() {
        // Edge A->B with only A's partition resident must be absent.
        let g = RawGraph {
            num_nodes: 2,
            num_relations: 1,
            edges: vec![Edge::new(0, 0, 1)],
            splits: Splits { train: vec![0], ..Splits::default() },
            node_dict: None,
            rel_dict: None,
        };
        let pm = PartitionMap {
            p: 2,
            node_to_partition: vec![0, 1],
            partition_sizes: vec![1, 1],
            train_partitions: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let store = EdgeBucketStore::build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let sub = InMemorySubgraph::load(&store, &[0]).unwrap();
        assert_eq!(sub.num_resident_edges(), 0);
        assert_eq!(sub.neighbors(0, Direction::Both).unwrap(), vec![]);
        assert!(sub.neighbors(1, Direction::Both).is_err());
    }

    #[test]
    fn offsets_match_bruteforce_on_random_graph() {
        let g = synth::random_graph(50, 600, 2, 21);
        let pm = assign_partitions(&g, 4, AssignMode::Random, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = EdgeBucketStore::build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let sub = InMemorySubgraph::load(&store, &[0, 1, 2, 3]).unwrap();
        let mut check = crate::seed::rng(42, &[1]);
        for _ in 0..20 {
            let node = rand::Rng::gen_range(&mut check, 0..50u32);
            let mut expect_out: Vec<(u32, u32)> =
                g.edges.iter().filter(|e| e.src == node).map(|e| (e.dst, e.rel)).collect();
            expect_out.sort_unstable();
            let mut got_out = sub.neighbors(node, Direction::Outgoing).unwrap();
            got_out.sort_unstable();
            assert_eq!(got_out, expect_out);

            let mut expect_in: Vec<(u32, u32)> =
                g.edges.iter().filter(|e| e.dst == node).map(|e| (e.src, e.rel)).collect();
            expect_in.sort_unstable();
            let mut got_in = sub.neighbors(node, Direction::Incoming).unwrap();
            got_in.sort_unstable();
            assert_eq!(got_in, expect_in);
        }
    }

    #[test]
    fn subgraph_equals_union_of_resident_buckets() {
        let g = synth::random_graph(40, 400, 1, 31);
        let pm = assign_partitions(&g, 4, AssignMode::Random, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = EdgeBucketStore::build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let resident = vec![1, 3];
        let sub = InMemorySubgraph::load(&store, &resident).unwrap();
        let mut expected = Vec::new();
        for &i in &resident {
            for &j in &resident {
                expected.extend(store.bucket_edges(i, j).unwrap());
            }
        }
        expected.sort_unstable_by_key(|e| (e.src, e.dst, e.rel));
        assert_eq!(sub.edges_by_src(), expected.as_slice());
    }

    #[test]
    fn incremental_swap_matches_full_rebuild() {
        let g = synth::random_graph(60, 900, 2, 77);
        let pm = assign_partitions(&g, 6, AssignMode::Random, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = EdgeBucketStore::build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let sub = InMemorySubgraph::load(&store, &[0, 1, 2]).unwrap();

        // Swap partition 2 out for 4: incremental vs from-scratch.
        let retained = [0u32, 1];
        let mut new_edges = Vec::new();
        for &r in retained.iter().chain([4].iter()) {
            new_edges.extend(store.bucket_edges(4, r).unwrap());
            if r != 4 {
                new_edges.extend(store.bucket_edges(r, 4).unwrap());
            }
        }
        let swapped = sub.apply_swap(&pm, &[2], &[4], new_edges).unwrap();
        let rebuilt = InMemorySubgraph::load(&store, &[0, 1, 4]).unwrap();
        assert_eq!(swapped.resident, rebuilt.resident);
        assert_eq!(swapped.edges_by_src(), rebuilt.edges_by_src());
        assert_eq!(swapped.by_dst, rebuilt.by_dst);
        assert_eq!(swapped.out_offsets, rebuilt.out_offsets);
        assert_eq!(swapped.in_offsets, rebuilt.in_offsets);
        assert_eq!(swapped.local_nodes, rebuilt.local_nodes);
    }
}
