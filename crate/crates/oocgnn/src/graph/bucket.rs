//! Partitioned on-disk edge storage.
//!
//! A preprocessed dataset directory holds:
//!   edges.bin       fixed-width little-endian (src, rel, dst) records,
//!                   grouped by edge bucket, buckets laid out row-major (i, j)
//!   buckets.idx     header + one (u64 byte offset, u64 edge count) per bucket
//!   partitions.bin  node -> physical partition assignment
//!   embeddings.bin  float32 rows, one region per partition, ascending node
//!                   id within each region
//!   adagrad.bin     optimizer accumulators, same layout as embeddings.bin
//!
//! Edge e lives in bucket (i, j) iff partition(src) = i and partition(dst) = j.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::{Edge, NodeId, PartitionMap, RawGraph};
use crate::error::{Error, Result};
use crate::seed::{self, TAG_INIT};

const IDX_MAGIC: &[u8; 8] = b"OGNNBKT1";
const PRT_MAGIC: &[u8; 8] = b"OGNNPRT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordWidth {
    U32,
    U64,
}

impl RecordWidth {
    pub fn bytes_per_field(self) -> u64 {
        match self {
            RecordWidth::U32 => 4,
            RecordWidth::U64 => 8,
        }
    }

    pub fn bytes_per_edge(self) -> u64 {
        3 * self.bytes_per_field()
    }
}

#[derive(Debug, Clone)]
pub struct BucketStoreOptions {
    pub width: RecordWidth,
    /// Embedding dimension used to size and initialize embeddings.bin.
    pub dim: usize,
    pub seed: u64,
}

impl Default for BucketStoreOptions {
    fn default() -> Self {
        BucketStoreOptions { width: RecordWidth::U32, dim: 16, seed: 0 }
    }
}

#[derive(Debug)]
pub struct EdgeBucketStore {
    dir: PathBuf,
    pub width: RecordWidth,
    pub p: u32,
    pub dim: usize,
    pub num_nodes: u32,
    pub num_relations: u32,
    pub num_edges: u64,
    pub seed: u64,
    /// (byte offset, edge count) per bucket, row-major by (i, j).
    bucket_index: Vec<(u64, u64)>,
    pub partition_map: PartitionMap,
    /// Rank of each node inside its partition's embedding region.
    node_rank: Vec<u32>,
    /// Starting embedding row of each partition region; last entry = num_nodes.
    partition_base: Vec<u64>,
    edges_file: File,
}

impl EdgeBucketStore {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn bucket_id(&self, i: u32, j: u32) -> usize {
        (i as usize) * (self.p as usize) + j as usize
    }

    pub fn bucket_count(&self, i: u32, j: u32) -> u64 {
        self.bucket_index[self.bucket_id(i, j)].1
    }

    pub fn nonempty_buckets(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.bucket_count(i, j) > 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Embedding-file row of a node (valid regardless of residency).
    pub fn row_of(&self, node: NodeId) -> u64 {
        let part = self.partition_map.partition_of(node) as usize;
        self.partition_base[part] + self.node_rank[node as usize] as u64
    }

    /// (starting row, row count) of a partition's embedding region.
    pub fn partition_region(&self, part: u32) -> (u64, u64) {
        let base = self.partition_base[part as usize];
        (base, self.partition_base[part as usize + 1] - base)
    }

    /// Ascending node ids of one partition.
    pub fn partition_node_list(&self, part: u32) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = (0..self.num_nodes)
            .filter(|&n| self.partition_map.partition_of(n) == part)
            .collect();
        nodes.sort_unstable();
        nodes
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.dir.join("embeddings.bin")
    }

    pub fn adagrad_path(&self) -> PathBuf {
        self.dir.join("adagrad.bin")
    }

    fn decode_edges(&self, buf: &[u8]) -> Result<Vec<Edge>> {
        let per = self.width.bytes_per_edge() as usize;
        let mut out = Vec::with_capacity(buf.len() / per);
        match self.width {
            RecordWidth::U32 => {
                for rec in buf.chunks_exact(per) {
                    out.push(Edge {
                        src: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
                        rel: u32::from_le_bytes(rec[4..8].try_into().unwrap()),
                        dst: u32::from_le_bytes(rec[8..12].try_into().unwrap()),
                    });
                }
            }
            RecordWidth::U64 => {
                for rec in buf.chunks_exact(per) {
                    let fields = [
                        u64::from_le_bytes(rec[0..8].try_into().unwrap()),
                        u64::from_le_bytes(rec[8..16].try_into().unwrap()),
                        u64::from_le_bytes(rec[16..24].try_into().unwrap()),
                    ];
                    for f in fields {
                        if f > u32::MAX as u64 {
                            return Err(Error::IdOverflow { id: f });
                        }
                    }
                    out.push(Edge { src: fields[0] as u32, rel: fields[1] as u32, dst: fields[2] as u32 });
                }
            }
        }
        Ok(out)
    }

    /// Read one bucket's edges from disk.
    pub fn bucket_edges(&self, i: u32, j: u32) -> Result<Vec<Edge>> {
        let (offset, count) = self.bucket_index[self.bucket_id(i, j)];
        let nbytes = count * self.width.bytes_per_edge();
        let mut buf = vec![0u8; nbytes as usize];
        self.edges_file.read_exact_at(&mut buf, offset)?;
        self.decode_edges(&buf)
    }

    /// All edges of every listed bucket, in bucket order.
    pub fn buckets_edges(&self, buckets: &[(u32, u32)]) -> Result<Vec<Edge>> {
        let mut out = Vec::new();
        for &(i, j) in buckets {
            out.extend(self.bucket_edges(i, j)?);
        }
        Ok(out)
    }

    /// Byte size of one partition's embedding region.
    pub fn partition_bytes(&self, part: u32) -> u64 {
        self.partition_region(part).1 * self.dim as u64 * 4
    }

    /// Byte size of one bucket on disk.
    pub fn bucket_bytes(&self, i: u32, j: u32) -> u64 {
        self.bucket_count(i, j) * self.width.bytes_per_edge()
    }

    /// Read the full embedding table in node-id order (row i = node i).
    pub fn read_all_embeddings(&self) -> Result<Vec<f32>> {
        let mut buf = Vec::new();
        File::open(self.embeddings_path())?.read_to_end(&mut buf)?;
        let expected = self.num_nodes as u64 * self.dim as u64 * 4;
        if buf.len() as u64 != expected {
            return Err(Error::Integrity(format!(
                "embeddings.bin is {} bytes, expected {}",
                buf.len(),
                expected
            )));
        }
        let d = self.dim;
        let mut table = vec![0f32; self.num_nodes as usize * d];
        for node in 0..self.num_nodes {
            let row = self.row_of(node) as usize;
            for k in 0..d {
                let at = (row * d + k) * 4;
                table[node as usize * d + k] =
                    f32::from_le_bytes(buf[at..at + 4].try_into().unwrap());
            }
        }
        Ok(table)
    }
}

fn write_header(w: &mut impl Write, store: &HeaderFields) -> Result<()> {
    w.write_all(IDX_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(store.width.bytes_per_field() as u32).to_le_bytes())?;
    w.write_all(&store.p.to_le_bytes())?;
    w.write_all(&(store.dim as u32).to_le_bytes())?;
    w.write_all(&(store.num_nodes as u64).to_le_bytes())?;
    w.write_all(&(store.num_relations as u64).to_le_bytes())?;
    w.write_all(&store.num_edges.to_le_bytes())?;
    w.write_all(&store.seed.to_le_bytes())?;
    Ok(())
}

struct HeaderFields {
    width: RecordWidth,
    p: u32,
    dim: usize,
    num_nodes: u32,
    num_relations: u32,
    num_edges: u64,
    seed: u64,
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

fn read_u64(buf: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(buf[at..at + 8].try_into().unwrap())
}

/// Materialize a graph's edge buckets, partition table, and embedding files.
/// Deterministic for a fixed (graph, partition map, options).
pub fn build(g: &RawGraph, pm: &PartitionMap, out_dir: &Path, opts: &BucketStoreOptions) -> Result<EdgeBucketStore> {
    if pm.node_to_partition.len() != g.num_nodes as usize {
        return Err(Error::InvalidArgument(
            "partition map does not cover the graph's nodes".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let p = pm.p as usize;
    let nbuckets = p * p;

    // Counting sort of edges into row-major bucket order. Order within a
    // bucket preserves the input edge order.
    let mut counts = vec![0u64; nbuckets];
    for e in &g.edges {
        let b = pm.partition_of(e.src) as usize * p + pm.partition_of(e.dst) as usize;
        counts[b] += 1;
    }
    let per_edge = opts.width.bytes_per_edge();
    let mut index = Vec::with_capacity(nbuckets);
    let mut acc = 0u64;
    for &c in &counts {
        index.push((acc * per_edge, c));
        acc += c;
    }
    let mut cursors: Vec<u64> = index.iter().map(|&(off, _)| off / per_edge).collect();
    let mut ordered = vec![Edge::new(0, 0, 0); g.edges.len()];
    for e in &g.edges {
        let b = pm.partition_of(e.src) as usize * p + pm.partition_of(e.dst) as usize;
        ordered[cursors[b] as usize] = *e;
        cursors[b] += 1;
    }

    let mut edges_w = BufWriter::new(File::create(out_dir.join("edges.bin"))?);
    match opts.width {
        RecordWidth::U32 => {
            for e in &ordered {
                edges_w.write_all(&e.src.to_le_bytes())?;
                edges_w.write_all(&e.rel.to_le_bytes())?;
                edges_w.write_all(&e.dst.to_le_bytes())?;
            }
        }
        RecordWidth::U64 => {
            for e in &ordered {
                edges_w.write_all(&(e.src as u64).to_le_bytes())?;
                edges_w.write_all(&(e.rel as u64).to_le_bytes())?;
                edges_w.write_all(&(e.dst as u64).to_le_bytes())?;
            }
        }
    }
    edges_w.flush()?;

    let header = HeaderFields {
        width: opts.width,
        p: pm.p,
        dim: opts.dim,
        num_nodes: g.num_nodes,
        num_relations: g.num_relations,
        num_edges: g.num_edges(),
        seed: opts.seed,
    };
    let mut idx_w = BufWriter::new(File::create(out_dir.join("buckets.idx"))?);
    write_header(&mut idx_w, &header)?;
    for &(off, cnt) in &index {
        idx_w.write_all(&off.to_le_bytes())?;
        idx_w.write_all(&cnt.to_le_bytes())?;
    }
    idx_w.flush()?;

    let mut prt_w = BufWriter::new(File::create(out_dir.join("partitions.bin"))?);
    prt_w.write_all(PRT_MAGIC)?;
    prt_w.write_all(&pm.p.to_le_bytes())?;
    prt_w.write_all(&pm.train_partitions.unwrap_or(u32::MAX).to_le_bytes())?;
    prt_w.write_all(&(g.num_nodes as u64).to_le_bytes())?;
    for &part in &pm.node_to_partition {
        prt_w.write_all(&part.to_le_bytes())?;
    }
    prt_w.flush()?;

    // Embeddings in partition-region order, uniform in [-0.5/d, 0.5/d];
    // accumulators start at zero.
    let d = opts.dim;
    let bound = 0.5 / d as f32;
    let mut rng = seed::rng(opts.seed, &[TAG_INIT]);
    let mut emb_w = BufWriter::new(File::create(out_dir.join("embeddings.bin"))?);
    let partition_nodes = pm.partition_nodes();
    for nodes in &partition_nodes {
        for _node in nodes {
            for _ in 0..d {
                let v: f32 = rng.gen_range(-bound..=bound);
                emb_w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    emb_w.flush()?;
    let zeros = vec![0u8; d * 4];
    let mut acc_w = BufWriter::new(File::create(out_dir.join("adagrad.bin"))?);
    for _ in 0..g.num_nodes {
        acc_w.write_all(&zeros)?;
    }
    acc_w.flush()?;

    open(out_dir)
}

/// Open a preprocessed directory, validating the index against file sizes.
pub fn open(dir: &Path) -> Result<EdgeBucketStore> {
    let mut idx_buf = Vec::new();
    File::open(dir.join("buckets.idx"))?.read_to_end(&mut idx_buf)?;
    if idx_buf.len() < 56 || &idx_buf[0..8] != IDX_MAGIC {
        return Err(Error::Integrity("buckets.idx has a bad header".into()));
    }
    let width = match read_u32(&idx_buf, 12) {
        4 => RecordWidth::U32,
        8 => RecordWidth::U64,
        other => return Err(Error::Integrity(format!("bad record width {other}"))),
    };
    let p = read_u32(&idx_buf, 16);
    let dim = read_u32(&idx_buf, 20) as usize;
    let num_nodes = read_u64(&idx_buf, 24);
    let num_relations = read_u64(&idx_buf, 32);
    let num_edges = read_u64(&idx_buf, 40);
    let seed = read_u64(&idx_buf, 48);
    if num_nodes > u32::MAX as u64 || num_relations > u32::MAX as u64 {
        return Err(Error::IdOverflow { id: num_nodes.max(num_relations) });
    }
    let nbuckets = p as usize * p as usize;
    let expected_len = 56 + nbuckets * 16;
    if idx_buf.len() != expected_len {
        return Err(Error::Integrity(format!(
            "buckets.idx is {} bytes, expected {} for p={}",
            idx_buf.len(),
            expected_len,
            p
        )));
    }
    let mut bucket_index = Vec::with_capacity(nbuckets);
    let mut total = 0u64;
    for b in 0..nbuckets {
        let off = read_u64(&idx_buf, 56 + b * 16);
        let cnt = read_u64(&idx_buf, 56 + b * 16 + 8);
        // Buckets are contiguous row-major, so each offset is implied by the
        // running edge total.
        if off != total * width.bytes_per_edge() {
            return Err(Error::Integrity(format!("bucket {b} offset {off} is not contiguous")));
        }
        bucket_index.push((off, cnt));
        total += cnt;
    }
    if total != num_edges {
        return Err(Error::Integrity(format!(
            "bucket counts sum to {total}, header says {num_edges}"
        )));
    }
    let edges_file = File::open(dir.join("edges.bin"))?;
    let file_len = edges_file.metadata()?.len();
    if file_len != num_edges * width.bytes_per_edge() {
        return Err(Error::Integrity(format!(
            "edges.bin is {} bytes, index implies {}",
            file_len,
            num_edges * width.bytes_per_edge()
        )));
    }

    let mut prt_buf = Vec::new();
    File::open(dir.join("partitions.bin"))?.read_to_end(&mut prt_buf)?;
    if prt_buf.len() < 24 || &prt_buf[0..8] != PRT_MAGIC {
        return Err(Error::Integrity("partitions.bin has a bad header".into()));
    }
    let prt_p = read_u32(&prt_buf, 8);
    let train_partitions_raw = read_u32(&prt_buf, 12);
    let prt_nodes = read_u64(&prt_buf, 16);
    if prt_p != p || prt_nodes != num_nodes {
        return Err(Error::Integrity("partitions.bin disagrees with buckets.idx".into()));
    }
    if prt_buf.len() != 24 + num_nodes as usize * 4 {
        return Err(Error::Integrity("partitions.bin is truncated".into()));
    }
    let mut node_to_partition = Vec::with_capacity(num_nodes as usize);
    for n in 0..num_nodes as usize {
        let part = read_u32(&prt_buf, 24 + n * 4);
        if part >= p {
            return Err(Error::Integrity(format!("node {n} maps to partition {part} >= p")));
        }
        node_to_partition.push(part);
    }
    let mut partition_sizes = vec![0u32; p as usize];
    for &part in &node_to_partition {
        partition_sizes[part as usize] += 1;
    }
    let pm = PartitionMap {
        p,
        node_to_partition,
        partition_sizes: partition_sizes.clone(),
        train_partitions: (train_partitions_raw != u32::MAX).then_some(train_partitions_raw),
    };

    // Region bases and within-partition ranks: regions follow partition id,
    // rows follow ascending node id inside a region.
    let mut partition_base = vec![0u64; p as usize + 1];
    for part in 0..p as usize {
        partition_base[part + 1] = partition_base[part] + partition_sizes[part] as u64;
    }
    let mut next_rank = vec![0u32; p as usize];
    let mut node_rank = vec![0u32; num_nodes as usize];
    for node in 0..num_nodes as usize {
        let part = pm.node_to_partition[node] as usize;
        node_rank[node] = next_rank[part];
        next_rank[part] += 1;
    }

    Ok(EdgeBucketStore {
        dir: dir.to_path_buf(),
        width,
        p,
        dim,
        num_nodes: num_nodes as u32,
        num_relations: num_relations as u32,
        num_edges,
        seed,
        bucket_index,
        partition_map: pm,
        node_rank,
        partition_base,
        edges_file,
    })
}

impl EdgeBucketStore {
    pub fn build(g: &RawGraph, pm: &PartitionMap, out_dir: &Path, opts: &BucketStoreOptions) -> Result<EdgeBucketStore> {
        build(g, pm, out_dir, opts)
    }

    pub fn open(dir: &Path) -> Result<EdgeBucketStore> {
        open(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assign_partitions, AssignMode, Splits};
    use crate::synth;

    fn tiny_graph() -> RawGraph {
        RawGraph {
            num_nodes: 2,
            num_relations: 1,
            edges: vec![Edge::new(0, 0, 1), Edge::new(1, 0, 0)],
            splits: Splits { train: vec![0, 1], ..Splits::default() },
            node_dict: None,
            rel_dict: None,
        }
    }

    #[test]
    fn single_partition_single_bucket() {
        let g = tiny_graph();
        let pm = assign_partitions(&g, 1, AssignMode::Random, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        assert_eq!(store.bucket_count(0, 0), 2);
        assert_eq!(store.bucket_edges(0, 0).unwrap(), g.edges);
    }

    #[test]
    fn buckets_follow_endpoint_partitions() {
        let g = tiny_graph();
        // Node 0 -> partition 0, node 1 -> partition 1, forced by hand.
        let pm = PartitionMap {
            p: 2,
            node_to_partition: vec![0, 1],
            partition_sizes: vec![1, 1],
            train_partitions: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let store = build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        assert_eq!(store.bucket_edges(0, 1).unwrap(), vec![Edge::new(0, 0, 1)]);
        assert_eq!(store.bucket_edges(1, 0).unwrap(), vec![Edge::new(1, 0, 0)]);
        assert_eq!(store.bucket_count(0, 0), 0);
        assert_eq!(store.bucket_count(1, 1), 0);
    }

    #[test]
    fn counts_sum_and_membership_on_random_graph() {
        let g = synth::random_graph(60, 1000, 3, 99);
        let pm = assign_partitions(&g, 4, AssignMode::Random, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let mut total = 0u64;
        for i in 0..4 {
            for j in 0..4 {
                let edges = store.bucket_edges(i, j).unwrap();
                assert_eq!(edges.len() as u64, store.bucket_count(i, j));
                total += edges.len() as u64;
                for e in &edges {
                    assert_eq!(pm.partition_of(e.src), i);
                    assert_eq!(pm.partition_of(e.dst), j);
                }
            }
        }
        assert_eq!(total, 1000);
    }

    #[test]
    fn roundtrip_preserves_edge_multiset() {
        let g = synth::random_graph(40, 500, 2, 17);
        let pm = assign_partitions(&g, 3, AssignMode::Random, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        let mut stored = store.buckets_edges(&store.nonempty_buckets()).unwrap();
        let mut original = g.edges.clone();
        let key = |e: &Edge| (e.src, e.rel, e.dst);
        stored.sort_unstable_by_key(key);
        original.sort_unstable_by_key(key);
        assert_eq!(stored, original);
    }

    #[test]
    fn open_validates_index_totals() {
        let g = tiny_graph();
        let pm = assign_partitions(&g, 1, AssignMode::Random, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        build(&g, &pm, dir.path(), &BucketStoreOptions::default()).unwrap();
        // Truncate the edge file behind the index's back.
        let path = dir.path().join("edges.bin");
        let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(4).unwrap();
        match open(dir.path()) {
            Err(Error::Integrity(_)) => {}
            other => panic!("expected Integrity, got {other:?}"),
        }
    }

    #[test]
    fn u64_records_roundtrip() {
        let g = tiny_graph();
        let pm = assign_partitions(&g, 1, AssignMode::Random, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = BucketStoreOptions { width: RecordWidth::U64, ..Default::default() };
        let store = build(&g, &pm, dir.path(), &opts).unwrap();
        assert_eq!(store.bucket_edges(0, 0).unwrap(), g.edges);
        let reopened = open(dir.path()).unwrap();
        assert_eq!(reopened.width, RecordWidth::U64);
        assert_eq!(reopened.bucket_edges(0, 0).unwrap(), g.edges);
    }

    #[test]
    fn build_is_deterministic() {
        let g = synth::random_graph(20, 100, 2, 3);
        let pm = assign_partitions(&g, 2, AssignMode::Random, 4).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        build(&g, &pm, d1.path(), &BucketStoreOptions::default()).unwrap();
        build(&g, &pm, d2.path(), &BucketStoreOptions::default()).unwrap();
        for name in ["edges.bin", "buckets.idx", "partitions.bin", "embeddings.bin"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical builds");
        }
    }

    #[test]
    fn embedding_rows_follow_partition_regions() {
        let g = synth::random_graph(10, 30, 1, 8);
        let pm = assign_partitions(&g, 3, AssignMode::Random, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = build(&g, &pm, dir.path(), &BucketStoreOptions { dim: 4, ..Default::default() }).unwrap();
        // Rows are unique and regions tile [0, num_nodes).
        let mut rows: Vec<u64> = (0..10).map(|n| store.row_of(n)).collect();
        rows.sort_unstable();
        assert_eq!(rows, (0..10).collect::<Vec<u64>>());
        // Within a partition, ascending node id means ascending row.
        for part in 0..3 {
            let nodes = store.partition_node_list(part);
            for w in nodes.windows(2) {
                assert!(store.row_of(w[0]) < store.row_of(w[1]));
            }
        }
    }
}
