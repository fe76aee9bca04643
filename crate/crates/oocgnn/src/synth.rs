//! Seeded synthetic graph generators for tests, benchmarks, and the `synth`
//! CLI subcommand.

use rand::Rng;

use crate::graph::{Edge, NodeLabels, RawGraph, Splits};
use crate::seed;

/// Uniform random multigraph: endpoints and relations drawn independently.
/// Self-loops and duplicate edges are allowed.
pub fn random_graph(num_nodes: u32, num_edges: u64, num_relations: u32, rng_seed: u64) -> RawGraph {
    let mut rng = seed::rng(rng_seed, &[0x5eed]);
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        edges.push(Edge {
            src: rng.gen_range(0..num_nodes),
            rel: rng.gen_range(0..num_relations),
            dst: rng.gen_range(0..num_nodes),
        });
    }
    RawGraph {
        num_nodes,
        num_relations,
        edges,
        splits: Splits { train: (0..num_edges).collect(), ..Splits::default() },
        node_dict: None,
        rel_dict: None,
    }
}

/// Random graph whose edges stay within `radius` of their source id (mod n),
/// so k-hop neighborhoods grow with k instead of swallowing the graph.
pub fn local_graph(num_nodes: u32, num_edges: u64, radius: u32, rng_seed: u64) -> RawGraph {
    let mut rng = seed::rng(rng_seed, &[0x10ca1]);
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        let src = rng.gen_range(0..num_nodes);
        let offset = rng.gen_range(1..=radius);
        let dst = (src + offset) % num_nodes;
        edges.push(Edge { src, rel: 0, dst });
    }
    RawGraph {
        num_nodes,
        num_relations: 1,
        edges,
        splits: Splits { train: (0..num_edges).collect(), ..Splits::default() },
        node_dict: None,
        rel_dict: None,
    }
}

/// Random graph with planted communities and node labels for classification.
/// Each node's class is its community; `intra` is the probability an edge
/// stays inside its source's community. Labeled nodes are split
/// train/valid/test 60/20/20 by node id hash.
pub fn labeled_graph(
    num_nodes: u32,
    num_edges: u64,
    num_classes: u32,
    intra: f64,
    rng_seed: u64,
) -> RawGraph {
    let mut rng = seed::rng(rng_seed, &[0xc1a55]);
    let class_of = |n: u32| n % num_classes;
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        let src = rng.gen_range(0..num_nodes);
        let dst = if rng.gen_bool(intra) {
            // Another node of the same community.
            let c = class_of(src);
            let span = num_nodes / num_classes;
            let k = rng.gen_range(0..span.max(1));
            (k * num_classes + c).min(num_nodes - 1)
        } else {
            rng.gen_range(0..num_nodes)
        };
        edges.push(Edge { src, rel: 0, dst });
    }
    let mut labels = NodeLabels { num_classes, ..Default::default() };
    for n in 0..num_nodes {
        let bucket = seed::derive(rng_seed, &[0x5713, n as u64]) % 10;
        let entry = (n, class_of(n));
        match bucket {
            0..=5 => labels.train.push(entry),
            6..=7 => labels.valid.push(entry),
            _ => labels.test.push(entry),
        }
    }
    let num_edges_total = edges.len() as u64;
    RawGraph {
        num_nodes,
        num_relations: 1,
        edges,
        splits: Splits {
            train: (0..num_edges_total).collect(),
            valid: vec![],
            test: vec![],
            labels: Some(labels),
        },
        node_dict: None,
        rel_dict: None,
    }
}

/// Split a link-prediction graph's edges into train/valid/test index sets.
pub fn with_lp_splits(mut g: RawGraph, valid_frac: f64, test_frac: f64, rng_seed: u64) -> RawGraph {
    let mut rng = seed::rng(rng_seed, &[0x511f7]);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for i in 0..g.num_edges() {
        let r: f64 = rng.gen();
        if r < test_frac {
            test.push(i);
        } else if r < test_frac + valid_frac {
            valid.push(i);
        } else {
            train.push(i);
        }
    }
    g.splits = Splits { train, valid, test, labels: g.splits.labels };
    g
}
