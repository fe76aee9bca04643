//! Preprocessed-dataset sidecars: held-out edges, node labels, id
//! dictionaries, and the preprocess entry point the CLI and C API share.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{
    assign_partitions, ingest, ingest_dataset, AssignMode, BucketStoreOptions, Edge,
    EdgeBucketStore, Format, IngestReport, NodeLabels, RawGraph, RecordWidth,
};
use crate::schedule::{autotune, TuningPlan};

const EVL_MAGIC: &[u8; 8] = b"OGNNEVL1";
const LBL_MAGIC: &[u8; 8] = b"OGNNLBL1";

pub fn write_eval_edges(dir: &Path, valid: &[Edge], test: &[Edge]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("eval_edges.bin"))?);
    w.write_all(EVL_MAGIC)?;
    w.write_all(&(valid.len() as u64).to_le_bytes())?;
    w.write_all(&(test.len() as u64).to_le_bytes())?;
    for e in valid.iter().chain(test) {
        w.write_all(&e.src.to_le_bytes())?;
        w.write_all(&e.rel.to_le_bytes())?;
        w.write_all(&e.dst.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_edges(dir: &Path) -> Result<(Vec<Edge>, Vec<Edge>)> {
    let path = dir.join("eval_edges.bin");
    if !path.exists() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut buf = Vec::new();
    File::open(&path)?.read_to_end(&mut buf)?;
    if buf.len() < 24 || &buf[0..8] != EVL_MAGIC {
        return Err(Error::Integrity("eval_edges.bin has a bad header".into()));
    }
    let n_valid = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let n_test = u64::from_le_bytes(buf[16..24].try_into().unwrap()) as usize;
    if buf.len() != 24 + (n_valid + n_test) * 12 {
        return Err(Error::Integrity("eval_edges.bin is truncated".into()));
    }
    let mut edges = Vec::with_capacity(n_valid + n_test);
    for rec in buf[24..].chunks_exact(12) {
        edges.push(Edge {
            src: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            rel: u32::from_le_bytes(rec[4..8].try_into().unwrap()),
            dst: u32::from_le_bytes(rec[8..12].try_into().unwrap()),
        });
    }
    let test = edges.split_off(n_valid);
    Ok((edges, test))
}

pub fn write_labels(dir: &Path, labels: &NodeLabels) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("labels.bin"))?);
    w.write_all(LBL_MAGIC)?;
    w.write_all(&labels.num_classes.to_le_bytes())?;
    for split in [&labels.train, &labels.valid, &labels.test] {
        w.write_all(&(split.len() as u64).to_le_bytes())?;
    }
    for split in [&labels.train, &labels.valid, &labels.test] {
        for &(node, class) in split {
            w.write_all(&node.to_le_bytes())?;
            w.write_all(&class.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(dir: &Path) -> Result<Option<NodeLabels>> {
    let path = dir.join("labels.bin");
    if !path.exists() {
        return Ok(None);
    }
    let mut buf = Vec::new();
    File::open(&path)?.read_to_end(&mut buf)?;
    if buf.len() < 36 || &buf[0..8] != LBL_MAGIC {
        return Err(Error::Integrity("labels.bin has a bad header".into()));
    }
    let num_classes = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    let counts: Vec<usize> = (0..3)
        .map(|i| u64::from_le_bytes(buf[12 + i * 8..20 + i * 8].try_into().unwrap()) as usize)
        .collect();
    let total: usize = counts.iter().sum();
    if buf.len() != 36 + total * 8 {
        return Err(Error::Integrity("labels.bin is truncated".into()));
    }
    let mut pairs = Vec::with_capacity(total);
    for rec in buf[36..].chunks_exact(8) {
        pairs.push((
            u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            u32::from_le_bytes(rec[4..8].try_into().unwrap()),
        ));
    }
    let valid_start = counts[0];
    let test_start = counts[0] + counts[1];
    Ok(Some(NodeLabels {
        num_classes,
        train: pairs[..valid_start].to_vec(),
        valid: pairs[valid_start..test_start].to_vec(),
        test: pairs[test_start..].to_vec(),
    }))
}

fn write_dict(path: &Path, names: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for name in names {
        writeln!(w, "{name}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a `node<TAB>class<TAB>split` labels file (split in train/valid/test).
pub fn read_labels_tsv(path: &Path) -> Result<NodeLabels> {
    let content = std::fs::read_to_string(path)?;
    let mut labels = NodeLabels::default();
    let mut max_class = 0;
    for (lineno, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: lineno + 1, msg };
        if cols.len() != 3 {
            return Err(err(format!("expected 3 columns, got {}", cols.len())));
        }
        let node: u32 = cols[0].parse().map_err(|_| err(format!("bad node id {:?}", cols[0])))?;
        let class: u32 = cols[1].parse().map_err(|_| err(format!("bad class {:?}", cols[1])))?;
        max_class = max_class.max(class);
        match cols[2] {
            "train" => labels.train.push((node, class)),
            "valid" => labels.valid.push((node, class)),
            "test" => labels.test.push((node, class)),
            other => return Err(err(format!("bad split {other:?}"))),
        }
    }
    labels.num_classes = max_class + 1;
    Ok(labels)
}

#[derive(Debug, Clone)]
pub enum PartitionCount {
    Explicit(u32),
    /// Derive p from the disk-read model with default desk-machine sizes.
    Auto,
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub format: Format,
    pub p: PartitionCount,
    pub mode: AssignMode,
    pub dim: usize,
    pub seed: u64,
    pub width: RecordWidth,
    /// Optional labels TSV for node classification datasets.
    pub labels: Option<PathBuf>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            format: Format::Tsv3Col,
            p: PartitionCount::Explicit(1),
            mode: AssignMode::Random,
            dim: 50,
            seed: 0,
            width: RecordWidth::U32,
            labels: None,
        }
    }
}

/// Ingest an edge list (file) or dataset directory (train/valid/test files),
/// partition it, and materialize the on-disk store. Training edges form the
/// stored graph; held-out edges land in `eval_edges.bin`.
pub fn preprocess(input: &Path, out_dir: &Path, opts: &PreprocessOptions) -> Result<IngestReport> {
    let mut graph = if input.is_dir() {
        ingest_dataset(input, opts.format)?
    } else {
        ingest(input, opts.format)?
    };
    if let Some(labels_path) = &opts.labels {
        graph.splits.labels = Some(read_labels_tsv(labels_path)?);
    }
    let report = IngestReport::from_graph(&graph);

    let training = graph.training_graph();
    let p = match opts.p {
        PartitionCount::Explicit(p) => p,
        PartitionCount::Auto => default_plan(&training, opts.dim)?.p,
    };
    let pm = assign_partitions(&training, p, opts.mode, opts.seed)?;
    std::fs::create_dir_all(out_dir)?;
    let store_opts = BucketStoreOptions { width: opts.width, dim: opts.dim, seed: opts.seed };
    EdgeBucketStore::build(&training, &pm, out_dir, &store_opts)?;

    write_eval_edges(
        out_dir,
        &graph.split_edges(&graph.splits.valid),
        &graph.split_edges(&graph.splits.test),
    )?;
    if let Some(labels) = &graph.splits.labels {
        write_labels(out_dir, labels)?;
    }
    if let Some(dict) = &graph.node_dict {
        write_dict(&out_dir.join("node_dict.tsv"), dict)?;
    }
    if let Some(dict) = &graph.rel_dict {
        write_dict(&out_dir.join("rel_dict.tsv"), dict)?;
    }
    Ok(report)
}

/// Auto-tuning with desk defaults: half the machine's conservative 8 GiB
/// memory budget, 4 KiB blocks, 256 MiB working reserve.
fn default_plan(g: &RawGraph, dim: usize) -> Result<TuningPlan> {
    autotune(
        g.num_nodes as u64,
        g.num_edges(),
        dim,
        12,
        4 << 30,
        4096,
        256 << 20,
    )
}

/// Flat f32 embedding table in node-id order from an embedding file laid
/// out in the store's partition regions.
pub fn read_embedding_table(store: &EdgeBucketStore, path: &Path) -> Result<Vec<f32>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let d = store.dim;
    let expected = store.num_nodes as usize * d * 4;
    if buf.len() != expected {
        return Err(Error::Integrity(format!(
            "{} is {} bytes, expected {expected}",
            path.display(),
            buf.len()
        )));
    }
    let mut table = vec![0f32; store.num_nodes as usize * d];
    for node in 0..store.num_nodes {
        let row = store.row_of(node) as usize;
        for k in 0..d {
            let at = (row * d + k) * 4;
            table[node as usize * d + k] = f32::from_le_bytes(buf[at..at + 4].try_into().unwrap());
        }
    }
    Ok(table)
}
