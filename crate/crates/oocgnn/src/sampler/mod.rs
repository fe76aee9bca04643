//! Multi-hop neighborhood sampling with one-hop sample reuse.
//!
//! A sample is encoded in five flat arrays. `node_ids` holds every node in
//! the sample exactly once, grouped into deltas: the nodes first introduced
//! at each sampling round, outermost group first (targets last). Each node's
//! one-hop neighborhood is sampled at most once per sample; the layer update
//! (`advance_layer`) drops the groups and neighbor lists a finished layer no
//! longer needs, so every layer sees the same array shape.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Direction, InMemorySubgraph, NodeId, RelId};
use crate::seed::{self, TAG_SAMPLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Fanout {
    /// Keep every neighbor.
    All,
    /// Sample up to this many neighbors, uniformly without replacement.
    Max(u32),
}

impl Fanout {
    pub fn from_name(tok: &str) -> Result<Fanout> {
        if tok == "all" {
            return Ok(Fanout::All);
        }
        let n: u32 = tok
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad fanout {tok:?} (expected integer or \"all\")")))?;
        if n == 0 {
            return Err(Error::InvalidArgument("fanout must be >= 1".into()));
        }
        Ok(Fanout::Max(n))
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Per-hop fanouts ordered from the target layer outward; the length is
    /// the number of GNN layers.
    pub fanouts: Vec<Fanout>,
    pub direction: Direction,
    pub seed: u64,
}

/// One sampled neighbor: the neighbor's node id and the relation of the edge
/// it was reached through. Under `Direction::Both`, incoming edges carry
/// relation id + num_relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NbrEntry {
    pub node: NodeId,
    pub rel: RelId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSample {
    /// Start of each delta group in `node_ids`, outermost group first.
    pub node_id_offsets: Vec<u32>,
    /// All node ids in the sample, no duplicates.
    pub node_ids: Vec<NodeId>,
    /// Neighbor-list start in `nbrs` for each listed node. Listed nodes are
    /// exactly `node_ids[node_id_offsets[1]..]`; the outermost group holds
    /// no lists.
    pub nbr_offsets: Vec<u32>,
    /// Sampled neighbors, contiguous per owning node.
    pub nbrs: Vec<NbrEntry>,
    /// Representation row of each entry in `nbrs` (index into `node_ids`).
    /// Empty until `build_repr_map` runs.
    pub repr_map: Vec<u32>,
    pub fanouts: Vec<Fanout>,
}

impl DenseSample {
    /// Number of GNN layers the sample supports.
    pub fn k(&self) -> usize {
        self.node_id_offsets.len() - 1
    }

    pub fn num_groups(&self) -> usize {
        self.node_id_offsets.len()
    }

    fn group_bounds(&self, g: usize) -> (usize, usize) {
        let start = self.node_id_offsets[g] as usize;
        let end = self
            .node_id_offsets
            .get(g + 1)
            .map(|&x| x as usize)
            .unwrap_or(self.node_ids.len());
        (start, end)
    }

    /// Delta group `g` (0 = outermost, `k()` = targets).
    pub fn group(&self, g: usize) -> &[NodeId] {
        let (s, e) = self.group_bounds(g);
        &self.node_ids[s..e]
    }

    pub fn targets(&self) -> &[NodeId] {
        self.group(self.num_groups() - 1)
    }

    /// Index into `node_ids` where listed nodes (those owning a neighbor
    /// range) begin.
    pub fn listed_start(&self) -> usize {
        if self.num_groups() >= 2 {
            self.node_id_offsets[1] as usize
        } else {
            self.node_ids.len()
        }
    }

    /// Nodes that own a neighbor range, in `nbr_offsets` order.
    pub fn listed_nodes(&self) -> &[NodeId] {
        &self.node_ids[self.listed_start()..]
    }

    /// Neighbor range of the j-th listed node.
    pub fn nbr_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = self.nbr_offsets[j] as usize;
        let end = self
            .nbr_offsets
            .get(j + 1)
            .map(|&x| x as usize)
            .unwrap_or(self.nbrs.len());
        start..end
    }

    /// Populate `repr_map` so that entry t points at the row of `nbrs[t]`'s
    /// node in `node_ids`.
    pub fn build_repr_map(&mut self) -> Result<()> {
        let pos: HashMap<NodeId, u32> = self
            .node_ids
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i as u32))
            .collect();
        let mut map = Vec::with_capacity(self.nbrs.len());
        for e in &self.nbrs {
            match pos.get(&e.node) {
                Some(&i) => map.push(i),
                None => return Err(Error::ClosureViolation(e.node as u64)),
            }
        }
        self.repr_map = map;
        Ok(())
    }

    /// Drop the outermost group and the neighbor lists of the next one,
    /// rebasing every offset, after a GNN layer has consumed them. The result
    /// supports one fewer layer.
    pub fn advance_layer(&self) -> Result<DenseSample> {
        if self.num_groups() < 2 {
            return Err(Error::InvalidArgument(
                "advance_layer needs at least two delta groups".into(),
            ));
        }
        let d0_len = self.node_id_offsets[1] as usize;
        let (d1_start, d1_end) = self.group_bounds(1);
        let d1_len = d1_end - d1_start;
        // Byte-for-byte the update is a set of slices and subtractions: the
        // first d1_len neighbor lists belong to the group being retired.
        let cut = if d1_len < self.nbr_offsets.len() {
            self.nbr_offsets[d1_len] as usize
        } else {
            self.nbrs.len()
        };
        let nbrs = self.nbrs[cut..].to_vec();
        let repr_map = if self.repr_map.is_empty() {
            Vec::new()
        } else {
            self.repr_map[cut..].iter().map(|&r| r - d0_len as u32).collect()
        };
        let nbr_offsets = self.nbr_offsets[d1_len..].iter().map(|&o| o - cut as u32).collect();
        let node_ids = self.node_ids[d0_len..].to_vec();
        let node_id_offsets = self.node_id_offsets[1..].iter().map(|&o| o - d0_len as u32).collect();
        let mut fanouts = self.fanouts.clone();
        fanouts.pop();
        Ok(DenseSample { node_id_offsets, node_ids, nbr_offsets, nbrs, repr_map, fanouts })
    }

    /// Check the structural invariants; test support.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &n in &self.node_ids {
            if !seen.insert(n) {
                return Err(Error::Integrity(format!("duplicate node id {n} in sample")));
            }
        }
        let listed = self.node_ids.len() - self.listed_start();
        if self.nbr_offsets.len() != listed {
            return Err(Error::Integrity(format!(
                "{} neighbor offsets for {} listed nodes",
                self.nbr_offsets.len(),
                listed
            )));
        }
        for j in 0..self.nbr_offsets.len() {
            let r = self.nbr_range(j);
            if r.start > r.end || r.end > self.nbrs.len() {
                return Err(Error::Integrity(format!("neighbor range {r:?} out of bounds")));
            }
        }
        for e in &self.nbrs {
            if !seen.contains(&e.node) {
                return Err(Error::ClosureViolation(e.node as u64));
            }
        }
        if !self.repr_map.is_empty() {
            if self.repr_map.len() != self.nbrs.len() {
                return Err(Error::Integrity("repr_map length mismatch".into()));
            }
            for (t, &r) in self.repr_map.iter().enumerate() {
                if r as usize >= self.node_ids.len() || self.node_ids[r as usize] != self.nbrs[t].node {
                    return Err(Error::Integrity(format!("repr_map[{t}] does not point at its neighbor")));
                }
            }
        }
        Ok(())
    }

    /// The five arrays as one JSON object, for golden-file tests.
    pub fn to_json(&self) -> String {
        #[derive(serde::Serialize)]
        struct Dump<'a> {
            node_id_offsets: &'a [u32],
            node_ids: &'a [u32],
            nbr_offsets: &'a [u32],
            nbrs: Vec<(u32, u32)>,
            repr_map: &'a [u32],
        }
        serde_json::to_string(&Dump {
            node_id_offsets: &self.node_id_offsets,
            node_ids: &self.node_ids,
            nbr_offsets: &self.nbr_offsets,
            nbrs: self.nbrs.iter().map(|e| (e.node, e.rel)).collect(),
            repr_map: &self.repr_map,
        })
        .expect("dense sample serializes")
    }
}

/// Sample up to `fanout` neighbors of each node in `delta`, uniformly
/// without replacement via a partial Fisher-Yates over the node's neighbor
/// list. Nodes with fewer neighbors than the fanout keep all of them, in
/// list order. Returns the packed neighbor array and per-node start offsets
/// (`offsets.len() == delta.len()`).
pub fn one_hop_sample(
    sub: &InMemorySubgraph,
    delta: &[NodeId],
    fanout: Fanout,
    direction: Direction,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<NbrEntry>, Vec<u32>)> {
    let mut nbrs = Vec::new();
    let mut offsets = Vec::with_capacity(delta.len());
    for &node in delta {
        offsets.push(nbrs.len() as u32);
        let mut list: Vec<(NodeId, RelId)> = sub.neighbors(node, direction)?;
        match fanout {
            Fanout::All => {
                nbrs.extend(list.into_iter().map(|(n, r)| NbrEntry { node: n, rel: r }));
            }
            Fanout::Max(f) => {
                let f = f as usize;
                if list.len() <= f {
                    nbrs.extend(list.into_iter().map(|(n, r)| NbrEntry { node: n, rel: r }));
                } else {
                    for t in 0..f {
                        let j = rng.gen_range(t..list.len());
                        list.swap(t, j);
                        let (n, r) = list[t];
                        nbrs.push(NbrEntry { node: n, rel: r });
                    }
                }
            }
        }
    }
    Ok((nbrs, offsets))
}

/// Unique node ids in `new_nbrs` that are not already in `node_ids`, in
/// first-occurrence order.
pub fn compute_next_delta(new_nbrs: &[NbrEntry], node_ids: &[NodeId]) -> Vec<NodeId> {
    let mut seen: std::collections::HashSet<NodeId> = node_ids.iter().copied().collect();
    let mut out = Vec::new();
    for e in new_nbrs {
        if seen.insert(e.node) {
            out.push(e.node);
        }
    }
    out
}

/// Build a k-hop sample for `targets`: k rounds of one-hop sampling over the
/// nodes newly introduced in the previous round, prepending each round's
/// groups so the final order runs outermost group to targets. Every node's
/// one-hop neighborhood is sampled at most once.
pub fn multi_hop_sample(
    sub: &InMemorySubgraph,
    targets: &[NodeId],
    cfg: &SamplerConfig,
) -> Result<DenseSample> {
    {
        let mut seen = std::collections::HashSet::new();
        for &t in targets {
            if !seen.insert(t) {
                return Err(Error::DuplicateTarget(t as u64));
            }
            if !sub.is_resident(t) {
                return Err(Error::NonResidentNode(t as u64));
            }
        }
    }
    let k = cfg.fanouts.len();
    let mut rng = seed::rng(cfg.seed, &[TAG_SAMPLE]);

    let mut node_id_offsets: Vec<u32> = vec![0];
    let mut node_ids: Vec<NodeId> = targets.to_vec();
    let mut nbr_offsets: Vec<u32> = Vec::new();
    let mut nbrs: Vec<NbrEntry> = Vec::new();
    let mut delta: Vec<NodeId> = targets.to_vec();

    for round in (1..=k).rev() {
        let fanout = cfg.fanouts[k - round];
        let (d_nbrs, d_offsets) = one_hop_sample(sub, &delta, fanout, cfg.direction, &mut rng)?;

        let shift = d_nbrs.len() as u32;
        let mut next_offsets = d_offsets;
        next_offsets.extend(nbr_offsets.iter().map(|&o| o + shift));
        nbr_offsets = next_offsets;

        let next_delta = compute_next_delta(&d_nbrs, &node_ids);

        let mut next_nbrs = d_nbrs;
        next_nbrs.append(&mut nbrs);
        nbrs = next_nbrs;

        let dlen = next_delta.len() as u32;
        let mut next_node_offsets = vec![0u32];
        next_node_offsets.extend(node_id_offsets.iter().map(|&o| o + dlen));
        node_id_offsets = next_node_offsets;

        let mut next_ids = next_delta.clone();
        next_ids.append(&mut node_ids);
        node_ids = next_ids;

        delta = next_delta;
    }

    Ok(DenseSample {
        node_id_offsets,
        node_ids,
        nbr_offsets,
        nbrs,
        repr_map: Vec::new(),
        fanouts: cfg.fanouts.clone(),
    })
}

#[cfg(test)]
mod tests;
