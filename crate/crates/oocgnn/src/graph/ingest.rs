//! Edge-list ingestion: TSV (2 or 3 columns) and flat binary triples.
//!
//! Integer ids are taken as-is (dense); if any token fails to parse as an
//! integer the whole file is dictionary-encoded in first-occurrence order
//! and the mapping is kept on the graph for later output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use super::{Edge, RawGraph, Splits};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `src<TAB>dst`, one edge per line.
    Tsv2Col,
    /// `src<TAB>rel<TAB>dst`, one edge per line.
    Tsv3Col,
    /// Little-endian u32 triples (src, rel, dst), no header.
    Binary,
}

impl Format {
    pub fn from_name(name: &str) -> Result<Format> {
        match name {
            "tsv-2col" => Ok(Format::Tsv2Col),
            "tsv-3col" => Ok(Format::Tsv3Col),
            "binary" => Ok(Format::Binary),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected tsv-2col, tsv-3col, or binary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IngestReport {
    pub num_nodes: u32,
    pub num_relations: u32,
    pub num_edges: u64,
    pub num_train: u64,
    pub num_valid: u64,
    pub num_test: u64,
    pub string_ids: bool,
}

impl IngestReport {
    pub fn from_graph(g: &RawGraph) -> IngestReport {
        IngestReport {
            num_nodes: g.num_nodes,
            num_relations: g.num_relations,
            num_edges: g.num_edges(),
            num_train: g.splits.train.len() as u64,
            num_valid: g.splits.valid.len() as u64,
            num_test: g.splits.test.len() as u64,
            string_ids: g.node_dict.is_some(),
        }
    }
}

/// Raw string triple plus its source location, before id encoding.
struct RawTriple {
    src: String,
    rel: Option<String>,
    dst: String,
}

fn read_tsv(path: &Path, format: Format) -> Result<Vec<RawTriple>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let parse_err = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: msg.to_string(),
        };
        match format {
            Format::Tsv2Col => {
                if cols.len() != 2 {
                    return Err(parse_err(&format!("expected 2 tab-separated columns, got {}", cols.len())));
                }
                out.push(RawTriple { src: cols[0].to_string(), rel: None, dst: cols[1].to_string() });
            }
            Format::Tsv3Col => {
                if cols.len() != 3 {
                    return Err(parse_err(&format!("expected 3 tab-separated columns, got {}", cols.len())));
                }
                out.push(RawTriple {
                    src: cols[0].to_string(),
                    rel: Some(cols[1].to_string()),
                    dst: cols[2].to_string(),
                });
            }
            Format::Binary => unreachable!(),
        }
    }
    Ok(out)
}

fn read_binary(path: &Path) -> Result<Vec<Edge>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() % 12 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("binary edge file length {} is not a multiple of 12", buf.len()),
        });
    }
    let mut edges = Vec::with_capacity(buf.len() / 12);
    for rec in buf.chunks_exact(12) {
        edges.push(Edge {
            src: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            rel: u32::from_le_bytes(rec[4..8].try_into().unwrap()),
            dst: u32::from_le_bytes(rec[8..12].try_into().unwrap()),
        });
    }
    Ok(edges)
}

/// Dictionary encoder: integers pass through when every token is an integer,
/// otherwise first-occurrence dense encoding.
struct Encoder {
    all_integers: bool,
    dict: HashMap<String, u32>,
    names: Vec<String>,
    max_int: u64,
}

impl Encoder {
    fn new() -> Encoder {
        Encoder { all_integers: true, dict: HashMap::new(), names: Vec::new(), max_int: 0 }
    }

    fn observe(&mut self, tok: &str) {
        if self.all_integers {
            match tok.parse::<u64>() {
                Ok(v) => self.max_int = self.max_int.max(v),
                Err(_) => self.all_integers = false,
            }
        }
    }

    fn encode(&mut self, tok: &str) -> Result<u32> {
        if self.all_integers {
            let v: u64 = tok.parse().expect("observed as integer");
            if v > u32::MAX as u64 {
                return Err(Error::IdOverflow { id: v });
            }
            Ok(v as u32)
        } else {
            if let Some(&id) = self.dict.get(tok) {
                return Ok(id);
            }
            let id = self.names.len() as u32;
            self.dict.insert(tok.to_string(), id);
            self.names.push(tok.to_string());
            Ok(id)
        }
    }

    fn count(&self) -> Result<u32> {
        if self.all_integers {
            if self.max_int >= u32::MAX as u64 {
                return Err(Error::IdOverflow { id: self.max_int });
            }
            Ok((self.max_int + 1) as u32)
        } else {
            Ok(self.names.len() as u32)
        }
    }

    fn into_dict(self) -> Option<Vec<String>> {
        if self.all_integers {
            None
        } else {
            Some(self.names)
        }
    }
}

fn encode_files(files: &[(PathBuf, Vec<RawTriple>)]) -> Result<(Vec<Edge>, Vec<u64>, RawGraph)> {
    let mut nodes = Encoder::new();
    let mut rels = Encoder::new();
    let mut typed = false;
    for (_, triples) in files {
        for t in triples {
            nodes.observe(&t.src);
            nodes.observe(&t.dst);
            if let Some(r) = &t.rel {
                typed = true;
                rels.observe(r);
            }
        }
    }
    let mut edges = Vec::new();
    let mut file_starts = Vec::new();
    for (_, triples) in files {
        file_starts.push(edges.len() as u64);
        for t in triples {
            let src = nodes.encode(&t.src)?;
            let dst = nodes.encode(&t.dst)?;
            let rel = match &t.rel {
                Some(r) => rels.encode(r)?,
                None => 0,
            };
            edges.push(Edge { src, rel, dst });
        }
    }
    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let num_nodes = nodes.count()?;
    let num_relations = if typed { rels.count()?.max(1) } else { 1 };
    let g = RawGraph {
        num_nodes,
        num_relations,
        edges: edges.clone(),
        splits: Splits::default(),
        node_dict: nodes.into_dict(),
        rel_dict: if typed { rels.into_dict() } else { None },
    };
    Ok((edges, file_starts, g))
}

/// Ingest one edge-list file. All edges land in the train split.
pub fn ingest(path: &Path, format: Format) -> Result<RawGraph> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("input file {} does not exist", path.display())));
    }
    if format == Format::Binary {
        let edges = read_binary(path)?;
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let num_nodes = edges.iter().map(|e| e.src.max(e.dst)).max().unwrap() + 1;
        let num_relations = edges.iter().map(|e| e.rel).max().unwrap() + 1;
        let n = edges.len() as u64;
        return Ok(RawGraph {
            num_nodes,
            num_relations,
            edges,
            splits: Splits { train: (0..n).collect(), ..Splits::default() },
            node_dict: None,
            rel_dict: None,
        });
    }
    let triples = read_tsv(path, format)?;
    let files = vec![(path.to_path_buf(), triples)];
    let (edges, _, mut g) = encode_files(&files)?;
    g.splits.train = (0..edges.len() as u64).collect();
    Ok(g)
}

/// Ingest a dataset directory holding `train.txt` (required) plus optional
/// `valid.txt` and `test.txt` in the same TSV format. The id dictionary is
/// built over all files so eval entities resolve even when absent from train.
pub fn ingest_dataset(dir: &Path, format: Format) -> Result<RawGraph> {
    if format == Format::Binary {
        return Err(Error::InvalidArgument("dataset directories must be TSV".into()));
    }
    let train = dir.join("train.txt");
    if !train.exists() {
        return Err(Error::InvalidArgument(format!("{} has no train.txt", dir.display())));
    }
    let mut files = vec![(train.clone(), read_tsv(&train, format)?)];
    for name in ["valid.txt", "test.txt"] {
        let p = dir.join(name);
        if p.exists() {
            files.push((p.clone(), read_tsv(&p, format)?));
        }
    }
    let (edges, starts, mut g) = encode_files(&files)?;
    let total = edges.len() as u64;
    let mut bounds = starts.clone();
    bounds.push(total);
    for (i, (path, _)) in files.iter().enumerate() {
        let range = bounds[i]..bounds[i + 1];
        let name = path.file_name().unwrap().to_string_lossy();
        match name.as_ref() {
            "train.txt" => g.splits.train = range.collect(),
            "valid.txt" => g.splits.valid = range.collect(),
            "test.txt" => g.splits.test = range.collect(),
            _ => {}
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_integer_tsv3() {
        let f = write_tmp("0\t0\t1\n1\t0\t2\n2\t0\t3\n3\t0\t0\n");
        let g = ingest(f.path(), Format::Tsv3Col).unwrap();
        assert_eq!(g.num_nodes, 4);
        assert_eq!(g.num_relations, 1);
        assert_eq!(g.num_edges(), 4);
        assert!(g.node_dict.is_none());
        assert_eq!(g.edges[0], Edge::new(0, 0, 1));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("");
        match ingest(f.path(), Format::Tsv2Col) {
            Err(Error::NoEdges) => {}
            other => panic!("expected NoEdges, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("0\t1\n0\t1\t2\n");
        match ingest(f.path(), Format::Tsv2Col) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn string_ids_are_dictionary_encoded() {
        let f = write_tmp("alice\tknows\tbob\nbob\tknows\tcarol\ncarol\tlikes\talice\n");
        let g = ingest(f.path(), Format::Tsv3Col).unwrap();
        assert_eq!(g.num_nodes, 3);
        assert_eq!(g.num_relations, 2);
        let dict = g.node_dict.as_ref().unwrap();
        assert_eq!(dict[0], "alice");
        assert_eq!(dict[1], "bob");
        assert_eq!(g.edges[0], Edge::new(0, 0, 1));
    }

    #[test]
    fn two_col_is_untyped() {
        let f = write_tmp("0\t1\n1\t2\n");
        let g = ingest(f.path(), Format::Tsv2Col).unwrap();
        assert_eq!(g.num_relations, 1);
        assert!(g.edges.iter().all(|e| e.rel == 0));
    }

    #[test]
    fn id_overflow_instructs_wide_mode() {
        let f = write_tmp(&format!("0\t{}\n", u32::MAX as u64 + 5));
        match ingest(f.path(), Format::Tsv2Col) {
            Err(Error::IdOverflow { id }) => assert_eq!(id, u32::MAX as u64 + 5),
            other => panic!("expected IdOverflow, got {other:?}"),
        }
    }

    #[test]
    fn binary_roundtrip() {
        let mut bytes = Vec::new();
        for (s, r, d) in [(0u32, 0u32, 1u32), (1, 0, 2)] {
            bytes.extend_from_slice(&s.to_le_bytes());
            bytes.extend_from_slice(&r.to_le_bytes());
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&bytes).unwrap();
        let g = ingest(f.path(), Format::Binary).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.edges[1], Edge::new(1, 0, 2));
    }

    #[test]
    fn dataset_directory_splits() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "a\tr\tb\nb\tr\tc\n").unwrap();
        std::fs::write(dir.path().join("valid.txt"), "a\tr\tc\n").unwrap();
        std::fs::write(dir.path().join("test.txt"), "c\tr\ta\n").unwrap();
        let g = ingest_dataset(dir.path(), Format::Tsv3Col).unwrap();
        assert_eq!(g.num_edges(), 4);
        assert_eq!(g.splits.train.len(), 2);
        assert_eq!(g.splits.valid.len(), 1);
        assert_eq!(g.splits.test.len(), 1);
        let tg = g.training_graph();
        assert_eq!(tg.num_edges(), 2);
        assert_eq!(tg.num_nodes, g.num_nodes);
    }
}
