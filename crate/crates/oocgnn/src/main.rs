//! Command-line interface: preprocess, plan, train, eval, bias, synth.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oocgnn::engine::{
    evaluate_lp, evaluate_nc, full_graph_representations, load_checkpoint, EvalMode, Task,
};
use oocgnn::error::{Error, Result};
use oocgnn::graph::{AssignMode, EdgeBucketStore, Format, InMemorySubgraph, RecordWidth};
use oocgnn::schedule::autotune;
use oocgnn::trainer::{
    preprocess, read_eval_edges, read_labels, PartitionCount, PreprocessOptions, TrainConfig,
    Trainer,
};

#[derive(Parser)]
#[command(name = "oocgnn", about = "Disk-aware GNN training toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an edge list (file or train/valid/test directory) and build
    /// the partitioned on-disk store.
    Preprocess {
        /// TSV file, binary edge file, or dataset directory.
        input: PathBuf,
        out_dir: PathBuf,
        /// Physical partition count, or "auto".
        #[arg(long, default_value = "auto")]
        p: String,
        /// Node-to-partition mode: random or train-first.
        #[arg(long, default_value = "random")]
        mode: String,
        /// Input format: tsv-2col, tsv-3col, or binary.
        #[arg(long, default_value = "tsv-3col")]
        format: String,
        /// Embedding dimension for the initialized embedding file.
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write 64-bit edge records instead of 32-bit.
        #[arg(long)]
        wide_ids: bool,
        /// Labels TSV (node, class, split) for node classification.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Print the auto-tuned (p, l, c) plan for a preprocessed dataset.
    Plan {
        dataset: PathBuf,
        /// CPU memory budget in bytes.
        #[arg(long)]
        cpu: u64,
        /// Disk block size in bytes.
        #[arg(long, default_value_t = 4096)]
        block: u64,
        /// Working-memory reserve in bytes.
        #[arg(long, default_value_t = 256 << 20)]
        fudge: u64,
    },
    /// Train a model from a key=value config file; trailing overrides apply
    /// as key=value or --key value.
    Train {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint against a dataset's test split.
    Eval {
        checkpoint: PathBuf,
        dataset: PathBuf,
        /// all or sampled:N.
        #[arg(long, default_value = "all")]
        mode: String,
        /// Sampling direction used at training time (layered models).
        #[arg(long, default_value = "both")]
        direction: String,
    },
    /// Compute the edge-permutation bias of a policy's epoch schedule.
    Bias {
        dataset: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Logical partitions (comet only; default p/2).
        #[arg(long)]
        l: Option<u32>,
        /// Buffer capacity in physical partitions (default p/4, at least 2).
        #[arg(long)]
        c: Option<u32>,
        /// Include per-node tally trajectories in the report.
        #[arg(long)]
        trajectories: bool,
    },
    /// Generate a seeded synthetic graph as TSV (optionally with labels).
    Synth {
        out: PathBuf,
        #[arg(long)]
        nodes: u32,
        #[arg(long)]
        edges: u64,
        #[arg(long, default_value_t = 1)]
        relations: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a labels TSV with this many planted communities.
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { input, out_dir, p, mode, format, dim, seed, wide_ids, labels } => {
            let opts = PreprocessOptions {
                format: Format::from_name(&format)?,
                p: if p == "auto" {
                    PartitionCount::Auto
                } else {
                    PartitionCount::Explicit(p.parse().map_err(|_| {
                        Error::InvalidArgument(format!("--p expects an integer or auto, got {p:?}"))
                    })?)
                },
                mode: AssignMode::from_name(&mode)?,
                dim,
                seed,
                width: if wide_ids { RecordWidth::U64 } else { RecordWidth::U32 },
                labels,
            };
            let report = preprocess(&input, &out_dir, &opts)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(())
        }
        Command::Plan { dataset, cpu, block, fudge } => {
            let store = EdgeBucketStore::open(&dataset)?;
            let plan = autotune(
                store.num_nodes as u64,
                store.num_edges,
                store.dim,
                store.width.bytes_per_edge(),
                cpu,
                block,
                fudge,
            )?;
            println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
            Ok(())
        }
        Command::Train { config, overrides } => {
            let mut cfg = TrainConfig::from_file(&config)?;
            cfg.apply_overrides(&overrides)?;
            let mut trainer = Trainer::new(cfg)?;
            trainer.train()?;
            Ok(())
        }
        Command::Eval { checkpoint, dataset, mode, direction } => {
            let mode = EvalMode::from_name(&mode)?;
            let direction = oocgnn::graph::Direction::from_name(&direction)?;
            let store = EdgeBucketStore::open(&dataset)?;
            let ckpt = load_checkpoint(&checkpoint)?;
            if ckpt.model.cfg.num_nodes != store.num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint has {} nodes, dataset has {}",
                    ckpt.model.cfg.num_nodes, store.num_nodes
                )));
            }
            let all: Vec<u32> = (0..store.p).collect();
            let sub = InMemorySubgraph::load(&store, &all)?;
            let reprs = full_graph_representations(&ckpt.model, &sub, &ckpt.embeddings, direction)?;
            match ckpt.model.cfg.task {
                Task::LinkPrediction => {
                    let (_, test) = read_eval_edges(&dataset)?;
                    if test.is_empty() {
                        return Err(Error::InvalidArgument("dataset has no test edges".into()));
                    }
                    let mrr = evaluate_lp(&reprs, &ckpt.model.rel_emb, &test, mode, 0);
                    println!("{}", serde_json::json!({ "mrr": mrr, "test_edges": test.len() }));
                }
                Task::NodeClassification => {
                    let labels = read_labels(&dataset)?
                        .ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))?;
                    let mut rows =
                        oocgnn::engine::Matrix::zeros(labels.test.len(), ckpt.model.cfg.dim);
                    for (i, &(node, _)) in labels.test.iter().enumerate() {
                        rows.row_mut(i).copy_from_slice(reprs.row(node as usize));
                    }
                    let acc = evaluate_nc(&rows, &ckpt.model, &labels.test)?;
                    println!(
                        "{}",
                        serde_json::json!({ "accuracy": acc, "test_nodes": labels.test.len() })
                    );
                }
            }
            Ok(())
        }
        Command::Bias { dataset, policy, seed, l, c, trajectories } => {
            let store = EdgeBucketStore::open(&dataset)?;
            let report = oocgnn::trainer::policy_bias(&store, &policy, seed, l, c, trajectories)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(())
        }
        Command::Synth { out, nodes, edges, relations, seed, classes, labels_out } => {
            use std::io::Write;
            let g = match classes {
                Some(c) => oocgnn::synth::labeled_graph(nodes, edges, c, 0.85, seed),
                None => oocgnn::synth::random_graph(nodes, edges, relations, seed),
            };
            let mut f = std::io::BufWriter::new(std::fs::File::create(&out)?);
            for e in &g.edges {
                writeln!(f, "{}\t{}\t{}", e.src, e.rel, e.dst)?;
            }
            f.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            if let (Some(path), Some(labels)) = (labels_out, g.splits.labels.as_ref()) {
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                for (split, pairs) in [
                    ("train", &labels.train),
                    ("valid", &labels.valid),
                    ("test", &labels.test),
                ] {
                    for &(node, class) in pairs {
                        writeln!(f, "{node}\t{class}\t{split}")?;
                    }
                }
            }
            eprintln!("wrote {} edges over {} nodes to {}", g.num_edges(), g.num_nodes, out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
