//! Graph ingestion and on-disk edge-bucket storage.

mod bucket;
mod ingest;
mod partition;
mod subgraph;

pub use bucket::{BucketStoreOptions, EdgeBucketStore, RecordWidth};
pub use ingest::{ingest, ingest_dataset, Format, IngestReport};
pub use partition::{assign_partitions, AssignMode, PartitionMap};
pub use subgraph::{Direction, InMemorySubgraph};

/// Node and relation ids are dense 32-bit integers in memory. The on-disk
/// record width is selectable (see [`RecordWidth`]); ids past the 32-bit
/// range are rejected at ingest.
pub type NodeId = u32;
pub type RelId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub rel: RelId,
    pub dst: NodeId,
}

impl Edge {
    pub fn new(src: NodeId, rel: RelId, dst: NodeId) -> Self {
        Edge { src, rel, dst }
    }
}

/// Labeled nodes for node classification, one (node, class) pair per example.
#[derive(Debug, Clone, Default)]
pub struct NodeLabels {
    pub num_classes: u32,
    pub train: Vec<(NodeId, u32)>,
    pub valid: Vec<(NodeId, u32)>,
    pub test: Vec<(NodeId, u32)>,
}

/// Train/valid/test splits. For link prediction these are index sets into
/// `RawGraph::edges`; node classification carries labeled node sets instead.
#[derive(Debug, Clone, Default)]
pub struct Splits {
    pub train: Vec<u64>,
    pub valid: Vec<u64>,
    pub test: Vec<u64>,
    pub labels: Option<NodeLabels>,
}

#[derive(Debug, Clone)]
pub struct RawGraph {
    pub num_nodes: u32,
    /// 1 for untyped graphs.
    pub num_relations: u32,
    pub edges: Vec<Edge>,
    pub splits: Splits,
    /// Dense-id -> original string id, present when the input used string ids.
    pub node_dict: Option<Vec<String>>,
    pub rel_dict: Option<Vec<String>>,
}

impl RawGraph {
    pub fn num_edges(&self) -> u64 {
        self.edges.len() as u64
    }

    /// Training nodes for node-classification tasks.
    pub fn train_nodes(&self) -> Option<Vec<NodeId>> {
        self.splits
            .labels
            .as_ref()
            .map(|l| l.train.iter().map(|&(n, _)| n).collect())
    }

    /// The graph whose structure is materialized on disk: training edges
    /// only, so that held-out edges never feed sampling or aggregation.
    /// When there are no eval splits this is the whole graph.
    pub fn training_graph(&self) -> RawGraph {
        if self.splits.valid.is_empty() && self.splits.test.is_empty() {
            return self.clone();
        }
        let edges: Vec<Edge> = self.splits.train.iter().map(|&i| self.edges[i as usize]).collect();
        let n = edges.len() as u64;
        RawGraph {
            num_nodes: self.num_nodes,
            num_relations: self.num_relations,
            edges,
            splits: Splits { train: (0..n).collect(), ..Splits::default() },
            node_dict: self.node_dict.clone(),
            rel_dict: self.rel_dict.clone(),
        }
    }

    /// Edges of a split as concrete triples.
    pub fn split_edges(&self, idx: &[u64]) -> Vec<Edge> {
        idx.iter().map(|&i| self.edges[i as usize]).collect()
    }
}
