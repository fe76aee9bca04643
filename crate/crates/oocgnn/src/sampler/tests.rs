use super::*;
use crate::graph::{assign_partitions, AssignMode, Edge, PartitionMap, RawGraph, Splits};
use crate::synth;
use std::collections::{HashMap, HashSet};

const A: u32 = 0;
const B: u32 = 1;
const C: u32 = 2;
const D: u32 = 3;
const E: u32 = 4;

/// The worked two-hop example graph: targets {A, B}, A's incoming neighbors
/// {C, D}, B's {D}, C's {E}, D's {A}.
fn example_graph() -> (RawGraph, InMemorySubgraph) {
    let edges = vec![
        Edge::new(C, 0, A),
        Edge::new(D, 0, A),
        Edge::new(D, 0, B),
        Edge::new(E, 0, C),
        Edge::new(A, 0, D),
    ];
    let g = RawGraph {
        num_nodes: 5,
        num_relations: 1,
        edges: edges.clone(),
        splits: Splits { train: (0..5).collect(), ..Splits::default() },
        node_dict: None,
        rel_dict: None,
    };
    let pm = assign_partitions(&g, 1, AssignMode::Random, 0).unwrap();
    let sub = InMemorySubgraph::from_edges(5, 1, &pm, &[0], edges).unwrap();
    (g, sub)
}

fn subgraph_of(g: &RawGraph) -> InMemorySubgraph {
    let pm = assign_partitions(g, 1, AssignMode::Random, 0).unwrap();
    InMemorySubgraph::from_edges(g.num_nodes, g.num_relations, &pm, &[0], g.edges.clone()).unwrap()
}

fn cfg(fanouts: Vec<Fanout>, direction: Direction, seed: u64) -> SamplerConfig {
    SamplerConfig { fanouts, direction, seed }
}

fn nbr_ids(nbrs: &[NbrEntry]) -> Vec<u32> {
    nbrs.iter().map(|e| e.node).collect()
}

#[test]
fn one_hop_empty_neighborhood_gives_empty_range() {
    let (_, sub) = example_graph();
    let mut rng = seed::rng(0, &[TAG_SAMPLE]);
    // E has no incoming edges.
    let (nbrs, offsets) = one_hop_sample(&sub, &[E, A], Fanout::Max(4), Direction::Incoming, &mut rng).unwrap();
    assert_eq!(offsets, vec![0, 0]);
    assert_eq!(nbr_ids(&nbrs), vec![C, D]);
}

#[test]
fn one_hop_small_list_returns_everything() {
    let (_, sub) = example_graph();
    let mut rng = seed::rng(0, &[TAG_SAMPLE]);
    let (nbrs, _) = one_hop_sample(&sub, &[A], Fanout::Max(10), Direction::Incoming, &mut rng).unwrap();
    assert_eq!(nbr_ids(&nbrs), vec![C, D]);
}

#[test]
fn one_hop_chain_incoming() {
    // chain 0 -> 1 -> 2 -> 3, incoming sample of {3} with fanout 1.
    let g = RawGraph {
        num_nodes: 4,
        num_relations: 1,
        edges: vec![Edge::new(0, 0, 1), Edge::new(1, 0, 2), Edge::new(2, 0, 3)],
        splits: Splits { train: vec![0, 1, 2], ..Splits::default() },
        node_dict: None,
        rel_dict: None,
    };
    let sub = subgraph_of(&g);
    let mut rng = seed::rng(1, &[TAG_SAMPLE]);
    let (nbrs, offsets) = one_hop_sample(&sub, &[3], Fanout::Max(1), Direction::Incoming, &mut rng).unwrap();
    assert_eq!(nbr_ids(&nbrs), vec![2]);
    assert_eq!(offsets, vec![0]);
}

#[test]
fn one_hop_respects_fanout_and_samples_without_replacement() {
    let g = synth::random_graph(20, 300, 1, 5);
    let sub = subgraph_of(&g);
    let mut rng = seed::rng(3, &[TAG_SAMPLE]);
    let nodes: Vec<u32> = (0..20).collect();
    let (nbrs, offsets) = one_hop_sample(&sub, &nodes, Fanout::Max(5), Direction::Outgoing, &mut rng).unwrap();
    for j in 0..nodes.len() {
        let end = offsets.get(j + 1).map(|&x| x as usize).unwrap_or(nbrs.len());
        let seg = &nbrs[offsets[j] as usize..end];
        assert!(seg.len() <= 5);
        let full: Vec<(u32, u32)> = sub.neighbors(nodes[j], Direction::Outgoing).unwrap();
        assert_eq!(seg.len(), full.len().min(5));
        // Sampling picks list positions without replacement, so the sampled
        // multiset is a sub-multiset of the full list.
        let mut remaining: Vec<(u32, u32)> = full.clone();
        for e in seg {
            let at = remaining
                .iter()
                .position(|&(n, r)| n == e.node && r == e.rel)
                .expect("sampled neighbor exists in the full list");
            remaining.swap_remove(at);
        }
    }
}

#[test]
fn one_hop_nonresident_node_errors() {
    let g = synth::random_graph(8, 20, 1, 2);
    let pm = PartitionMap {
        p: 2,
        node_to_partition: vec![0, 0, 0, 0, 1, 1, 1, 1],
        partition_sizes: vec![4, 4],
        train_partitions: None,
    };
    let edges: Vec<Edge> = g
        .edges
        .iter()
        .copied()
        .filter(|e| e.src < 4 && e.dst < 4)
        .collect();
    let sub = InMemorySubgraph::from_edges(8, 1, &pm, &[0], edges).unwrap();
    let mut rng = seed::rng(0, &[TAG_SAMPLE]);
    assert!(one_hop_sample(&sub, &[6], Fanout::All, Direction::Both, &mut rng).is_err());
}

#[test]
fn next_delta_worked_example() {
    // Neighbors {E, A} of the middle group with node_ids = {C, D, A, B}.
    let nbrs = vec![NbrEntry { node: E, rel: 0 }, NbrEntry { node: A, rel: 0 }];
    assert_eq!(compute_next_delta(&nbrs, &[C, D, A, B]), vec![E]);
}

#[test]
fn next_delta_all_seen_is_empty() {
    let nbrs = vec![NbrEntry { node: 1, rel: 0 }, NbrEntry { node: 2, rel: 0 }];
    assert!(compute_next_delta(&nbrs, &[1, 2, 3]).is_empty());
}

#[test]
fn next_delta_dedups_in_first_occurrence_order() {
    let nbrs: Vec<NbrEntry> = [5, 7, 5, 9].iter().map(|&n| NbrEntry { node: n, rel: 0 }).collect();
    assert_eq!(compute_next_delta(&nbrs, &[9]), vec![5, 7]);
}

#[test]
fn two_hop_example_layout_is_golden() {
    let (_, sub) = example_graph();
    let mut sample = multi_hop_sample(
        &sub,
        &[A, B],
        &cfg(vec![Fanout::All, Fanout::All], Direction::Incoming, 0),
    )
    .unwrap();
    assert_eq!(sample.group(2), &[A, B]);
    assert_eq!(sample.group(1), &[C, D]);
    assert_eq!(sample.group(0), &[E]);
    assert_eq!(sample.node_ids, vec![E, C, D, A, B]);
    assert_eq!(sample.node_id_offsets, vec![0, 1, 3]);
    assert_eq!(sample.listed_nodes(), &[C, D, A, B]);
    assert_eq!(sample.nbr_offsets, vec![0, 1, 2, 4]);
    assert_eq!(nbr_ids(&sample.nbrs), vec![E, A, C, D, D]);
    sample.build_repr_map().unwrap();
    assert_eq!(sample.repr_map, vec![0, 3, 1, 2, 2]);
    sample.validate().unwrap();

    // A owns exactly one neighbor list covering both layers.
    let occurrences = sample.listed_nodes().iter().filter(|&&n| n == A).count();
    assert_eq!(occurrences, 1);
    let a_slot = sample.listed_nodes().iter().position(|&n| n == A).unwrap();
    assert_eq!(nbr_ids(&sample.nbrs[sample.nbr_range(a_slot)]), vec![C, D]);
}

#[test]
fn zero_layer_sample_is_targets_only() {
    let (_, sub) = example_graph();
    let sample = multi_hop_sample(&sub, &[A, B], &cfg(vec![], Direction::Incoming, 0)).unwrap();
    assert_eq!(sample.k(), 0);
    assert_eq!(sample.node_ids, vec![A, B]);
    assert!(sample.nbrs.is_empty());
    assert!(sample.nbr_offsets.is_empty());
    sample.validate().unwrap();
}

#[test]
fn duplicate_targets_are_rejected() {
    let (_, sub) = example_graph();
    let err = multi_hop_sample(&sub, &[A, A], &cfg(vec![Fanout::All], Direction::Incoming, 0));
    assert!(matches!(err, Err(Error::DuplicateTarget(0))));
}

/// Every node reachable within k direction-respecting hops, by plain
/// recursion. Independent of the delta bookkeeping.
fn khop_closure(sub: &InMemorySubgraph, targets: &[u32], k: usize, direction: Direction) -> HashSet<u32> {
    let mut all: HashSet<u32> = targets.iter().copied().collect();
    let mut frontier: Vec<u32> = targets.to_vec();
    for _ in 0..k {
        let mut next = Vec::new();
        for &v in &frontier {
            for (n, _) in sub.neighbors(v, direction).unwrap() {
                if all.insert(n) {
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    all
}

#[test]
fn unlimited_fanout_matches_recursive_expansion() {
    for seed in 0..10u64 {
        let g = synth::random_graph(6, 9, 1, seed);
        let sub = subgraph_of(&g);
        for k in 1..=3usize {
            for direction in [Direction::Incoming, Direction::Outgoing, Direction::Both] {
                let sample =
                    multi_hop_sample(&sub, &[0, 3], &cfg(vec![Fanout::All; k], direction, seed)).unwrap();
                sample.validate().unwrap();
                let got: HashSet<u32> = sample.node_ids.iter().copied().collect();
                assert_eq!(got, khop_closure(&sub, &[0, 3], k, direction));
            }
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let g = synth::random_graph(40, 400, 3, 9);
    let sub = subgraph_of(&g);
    let targets: Vec<u32> = vec![5, 1, 17, 30];
    let c = cfg(vec![Fanout::Max(3), Fanout::Max(2)], Direction::Both, 1234);
    let a = multi_hop_sample(&sub, &targets, &c).unwrap();
    let b = multi_hop_sample(&sub, &targets, &c).unwrap();
    assert_eq!(a, b);
    let other = multi_hop_sample(
        &sub,
        &targets,
        &cfg(vec![Fanout::Max(3), Fanout::Max(2)], Direction::Both, 1235),
    )
    .unwrap();
    assert_ne!(a, other, "different seeds should differ on this graph");
}

#[test]
fn effective_fanout_follows_entry_hop() {
    // A node's list length is bounded by the fanout of the hop where it
    // entered the sample, not the hop that reused it.
    let g = synth::random_graph(30, 600, 1, 4);
    let sub = subgraph_of(&g);
    let fanouts = vec![Fanout::Max(7), Fanout::Max(3), Fanout::Max(2)];
    let sample = multi_hop_sample(&sub, &[0, 1, 2], &cfg(fanouts.clone(), Direction::Outgoing, 8)).unwrap();
    sample.validate().unwrap();
    let k = sample.k();
    // Entry hop of each node: group g entered at round g+... targets sit in
    // group k and were sampled with fanouts[0]; group k-1 with fanouts[1]...
    let mut entry_fanout: HashMap<u32, u32> = HashMap::new();
    for gidx in 0..sample.num_groups() {
        let fanout = if gidx == 0 {
            None // outermost group owns no list
        } else {
            Some(match fanouts[k - gidx] {
                Fanout::Max(f) => f,
                Fanout::All => u32::MAX,
            })
        };
        if let Some(f) = fanout {
            for &n in sample.group(gidx) {
                entry_fanout.insert(n, f);
            }
        }
    }
    for (j, &node) in sample.listed_nodes().iter().enumerate() {
        let len = sample.nbr_range(j).len() as u32;
        assert!(
            len <= entry_fanout[&node],
            "node {node} has {len} neighbors, entry fanout {}",
            entry_fanout[&node]
        );
    }
}

#[test]
fn single_sampling_one_list_per_node() {
    let g = synth::random_graph(25, 300, 1, 6);
    let sub = subgraph_of(&g);
    let sample = multi_hop_sample(
        &sub,
        &[0, 5, 9],
        &cfg(vec![Fanout::Max(4); 3], Direction::Both, 77),
    )
    .unwrap();
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &n in sample.listed_nodes() {
        *counts.entry(n).or_default() += 1;
    }
    assert!(counts.values().all(|&c| c == 1));
}

#[test]
fn repr_map_defining_property() {
    let g = synth::random_graph(30, 250, 2, 14);
    let sub = subgraph_of(&g);
    let mut sample =
        multi_hop_sample(&sub, &[1, 2, 3], &cfg(vec![Fanout::Max(5); 2], Direction::Both, 5)).unwrap();
    sample.build_repr_map().unwrap();
    for (t, e) in sample.nbrs.iter().enumerate() {
        assert_eq!(sample.node_ids[sample.repr_map[t] as usize], e.node);
    }
}

#[test]
fn repr_map_on_empty_nbrs() {
    let (_, sub) = example_graph();
    let mut sample = multi_hop_sample(&sub, &[A], &cfg(vec![], Direction::Incoming, 0)).unwrap();
    sample.build_repr_map().unwrap();
    assert!(sample.repr_map.is_empty());
}

#[test]
fn repr_map_closure_violation() {
    let mut sample = DenseSample {
        node_id_offsets: vec![0, 1],
        node_ids: vec![0, 1],
        nbr_offsets: vec![0],
        nbrs: vec![NbrEntry { node: 9, rel: 0 }],
        repr_map: vec![],
        fanouts: vec![Fanout::All],
    };
    assert!(matches!(sample.build_repr_map(), Err(Error::ClosureViolation(9))));
}

#[test]
fn advance_layer_on_worked_example() {
    let (_, sub) = example_graph();
    let mut sample = multi_hop_sample(
        &sub,
        &[A, B],
        &cfg(vec![Fanout::All, Fanout::All], Direction::Incoming, 0),
    )
    .unwrap();
    sample.build_repr_map().unwrap();
    let advanced = sample.advance_layer().unwrap();
    // E and the neighbor lists of {C, D} drop out after layer one.
    assert_eq!(advanced.node_ids, vec![C, D, A, B]);
    assert_eq!(advanced.node_id_offsets, vec![0, 2]);
    assert_eq!(advanced.listed_nodes(), &[A, B]);
    assert_eq!(nbr_ids(&advanced.nbrs), vec![C, D, D]);
    assert_eq!(advanced.nbr_offsets, vec![0, 2]);
    assert_eq!(advanced.repr_map, vec![0, 1, 1]);
    advanced.validate().unwrap();
}

#[test]
fn advance_layer_to_degenerate() {
    let (_, sub) = example_graph();
    let mut sample =
        multi_hop_sample(&sub, &[A, B], &cfg(vec![Fanout::All], Direction::Incoming, 0)).unwrap();
    sample.build_repr_map().unwrap();
    let advanced = sample.advance_layer().unwrap();
    assert_eq!(advanced.node_ids, vec![A, B]);
    assert!(advanced.nbrs.is_empty());
    assert!(advanced.nbr_offsets.is_empty());
    assert_eq!(advanced.k(), 0);
    assert!(advanced.advance_layer().is_err());
}

/// Reassemble the advanced sample from the original's retained groups; an
/// independent reconstruction of what advance_layer slices out.
fn rebuild_from_retained(sample: &DenseSample) -> DenseSample {
    let groups: Vec<Vec<u32>> = (1..sample.num_groups()).map(|g| sample.group(g).to_vec()).collect();
    let node_ids: Vec<u32> = groups.iter().flatten().copied().collect();
    let mut node_id_offsets = vec![0u32];
    for g in &groups[..groups.len() - 1] {
        node_id_offsets.push(node_id_offsets.last().unwrap() + g.len() as u32);
    }
    // Listed nodes of the rebuilt sample are everything past the first
    // retained group; each keeps its single list from the original.
    let listed: Vec<u32> = groups[1..].iter().flatten().copied().collect();
    let original_slot: HashMap<u32, usize> = sample
        .listed_nodes()
        .iter()
        .enumerate()
        .map(|(j, &n)| (n, j))
        .collect();
    let mut nbrs = Vec::new();
    let mut nbr_offsets = Vec::new();
    for &node in &listed {
        nbr_offsets.push(nbrs.len() as u32);
        let j = original_slot[&node];
        nbrs.extend_from_slice(&sample.nbrs[sample.nbr_range(j)]);
    }
    let pos: HashMap<u32, u32> = node_ids.iter().enumerate().map(|(i, &n)| (n, i as u32)).collect();
    let repr_map = nbrs.iter().map(|e: &NbrEntry| pos[&e.node]).collect();
    DenseSample {
        node_id_offsets,
        node_ids,
        nbr_offsets,
        nbrs,
        repr_map,
        fanouts: sample.fanouts[..sample.fanouts.len() - 1].to_vec(),
    }
}

#[test]
fn advance_twice_matches_reconstruction() {
    for seed in 0..8u64 {
        let g = synth::random_graph(40, 500, 2, seed);
        let sub = subgraph_of(&g);
        let mut sample = multi_hop_sample(
            &sub,
            &[0, 7, 13],
            &cfg(vec![Fanout::Max(4); 3], Direction::Both, seed),
        )
        .unwrap();
        sample.build_repr_map().unwrap();

        let once = sample.advance_layer().unwrap();
        assert_eq!(once, rebuild_from_retained(&sample));
        let twice = once.advance_layer().unwrap();
        assert_eq!(twice, rebuild_from_retained(&once));
        twice.validate().unwrap();
        // Composing k advances always lands on the degenerate targets-only
        // sample.
        let thrice = twice.advance_layer().unwrap();
        assert_eq!(thrice.node_ids, sample.targets());
        assert!(thrice.nbrs.is_empty());
        assert_eq!(thrice.k(), 0);
    }
}

#[test]
fn json_dump_has_five_arrays() {
    let (_, sub) = example_graph();
    let mut sample = multi_hop_sample(
        &sub,
        &[A, B],
        &cfg(vec![Fanout::All, Fanout::All], Direction::Incoming, 0),
    )
    .unwrap();
    sample.build_repr_map().unwrap();
    let v: serde_json::Value = serde_json::from_str(&sample.to_json()).unwrap();
    assert_eq!(v["node_ids"], serde_json::json!([E, C, D, A, B]));
    assert_eq!(v["node_id_offsets"], serde_json::json!([0, 1, 3]));
    assert_eq!(v["nbr_offsets"], serde_json::json!([0, 1, 2, 4]));
    assert_eq!(v["repr_map"], serde_json::json!([0, 3, 1, 2, 2]));
    assert_eq!(v["nbrs"][0], serde_json::json!([E, 0]));
}
