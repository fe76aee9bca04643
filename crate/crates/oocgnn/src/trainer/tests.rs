use super::*;
use crate::engine::{EvalMode, Task};
use crate::graph::{AssignMode, Format};
use crate::sampler::Fanout;
use crate::synth;
use std::io::Write;
use std::path::Path;

fn write_graph_tsv(g: &crate::graph::RawGraph, path: &Path) {
    let mut f = std::fs::File::create(path).unwrap();
    for e in &g.edges {
        writeln!(f, "{}\t{}\t{}", e.src, e.rel, e.dst).unwrap();
    }
}

fn write_labels_tsv(g: &crate::graph::RawGraph, path: &Path) {
    let labels = g.splits.labels.as_ref().unwrap();
    let mut f = std::fs::File::create(path).unwrap();
    for (split, pairs) in [
        ("train", &labels.train),
        ("valid", &labels.valid),
        ("test", &labels.test),
    ] {
        for &(node, class) in pairs {
            writeln!(f, "{node}\t{class}\t{split}").unwrap();
        }
    }
}

/// Synthetic link-prediction dataset on disk: preprocessed store + config.
fn lp_dataset(dir: &Path, nodes: u32, edges: u64, p: u32, dim: usize, seed: u64) {
    let g = synth::random_graph(nodes, edges, 3, seed);
    let tsv = dir.join("edges.tsv");
    write_graph_tsv(&g, &tsv);
    let opts = PreprocessOptions {
        p: PartitionCount::Explicit(p),
        dim,
        seed,
        ..Default::default()
    };
    preprocess(&tsv, &dir.join("data"), &opts).unwrap();
}

fn base_cfg(dir: &Path, out: &str) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.data_dir = dir.join("data");
    cfg.out_dir = dir.join(out);
    cfg.negatives = 4;
    cfg.batch_size = 16;
    cfg.epochs = 1;
    cfg.eval_mode = EvalMode::AllEntities;
    cfg
}

#[test]
fn zero_learning_rate_leaves_the_model_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    lp_dataset(dir.path(), 20, 40, 1, 8, 1);
    let mut cfg = base_cfg(dir.path(), "out");
    cfg.lr = 0.0;
    let mut trainer = Trainer::new(cfg).unwrap();
    let rel_before = trainer.model.rel_emb.clone();
    let emb_before = std::fs::read(dir.path().join("data/embeddings.bin")).unwrap();
    let metrics = trainer.train().unwrap();
    assert_eq!(metrics.len(), 1);
    assert!(metrics[0].loss_mean.is_finite());
    assert!(metrics[0].loss_mean > 0.0);
    assert_eq!(trainer.model.rel_emb.data, rel_before.data);
    let emb_after = std::fs::read(dir.path().join("out/embeddings.bin")).unwrap();
    assert_eq!(emb_before, emb_after);
}

#[test]
fn epoch_consumes_every_training_edge_once() {
    let dir = tempfile::tempdir().unwrap();
    lp_dataset(dir.path(), 30, 77, 2, 8, 2);
    let cfg = base_cfg(dir.path(), "out");
    let mut trainer = Trainer::new(cfg).unwrap();
    let metrics = trainer.train().unwrap();
    assert_eq!(metrics[0].examples, 77);
}

#[test]
fn identical_config_and_seed_reproduce_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    lp_dataset(dir.path(), 24, 60, 2, 8, 3);
    for out in ["a", "b"] {
        let mut cfg = base_cfg(dir.path(), out);
        cfg.epochs = 2;
        cfg.seed = 77;
        Trainer::new(cfg).unwrap().train().unwrap();
    }
    let a = std::fs::read(dir.path().join("a/model.ckpt")).unwrap();
    let b = std::fs::read(dir.path().join("b/model.ckpt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pipeline_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    lp_dataset(dir.path(), 24, 60, 2, 8, 4);
    for (out, pipeline) in [("a", false), ("b", true)] {
        let mut cfg = base_cfg(dir.path(), out);
        cfg.pipeline = pipeline;
        cfg.seed = 5;
        Trainer::new(cfg).unwrap().train().unwrap();
    }
    let a = std::fs::read(dir.path().join("a/model.ckpt")).unwrap();
    let b = std::fs::read(dir.path().join("b/model.ckpt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn disk_run_with_shared_schedule_matches_in_memory_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    lp_dataset(dir.path(), 40, 120, 4, 8, 6);

    let mut disk_cfg = base_cfg(dir.path(), "disk");
    disk_cfg.storage = Storage::Disk;
    disk_cfg.l = Some(4);
    disk_cfg.c = Some(2);
    disk_cfg.epochs = 2;
    disk_cfg.seed = 9;
    let mut disk = Trainer::new(disk_cfg).unwrap();
    let schedules: Vec<_> = (0..2).map(|e| disk.epoch_schedule(e).unwrap()).collect();
    disk.train().unwrap();

    let mut mem_cfg = base_cfg(dir.path(), "mem");
    mem_cfg.epochs = 2;
    mem_cfg.seed = 9;
    let mut mem = Trainer::new(mem_cfg).unwrap();
    mem.force_schedules(schedules);
    mem.train().unwrap();

    let a = std::fs::read(dir.path().join("disk/model.ckpt")).unwrap();
    let b = std::fs::read(dir.path().join("mem/model.ckpt")).unwrap();
    assert_eq!(a, b, "disk and in-memory training diverged under a shared schedule");
    let ea = std::fs::read(dir.path().join("disk/embeddings.bin")).unwrap();
    let eb = std::fs::read(dir.path().join("mem/embeddings.bin")).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn training_lifts_mrr_above_the_untrained_model() {
    let dir = tempfile::tempdir().unwrap();
    // Community-structured graph: held-out edges stay mostly inside their
    // community, so link scores have something to learn.
    let g = synth::with_lp_splits(synth::labeled_graph(60, 1600, 4, 0.9, 7), 0.1, 0.1, 7);
    let data = dir.path().join("dataset");
    std::fs::create_dir_all(&data).unwrap();
    for (name, idx) in [
        ("train.txt", &g.splits.train),
        ("valid.txt", &g.splits.valid),
        ("test.txt", &g.splits.test),
    ] {
        let mut f = std::fs::File::create(data.join(name)).unwrap();
        for e in g.split_edges(idx) {
            writeln!(f, "{}\t{}\t{}", e.src, e.rel, e.dst).unwrap();
        }
    }
    let opts = PreprocessOptions {
        p: PartitionCount::Explicit(1),
        dim: 16,
        seed: 7,
        ..Default::default()
    };
    preprocess(&data, &dir.path().join("data"), &opts).unwrap();

    let mut cfg = base_cfg(dir.path(), "out");
    cfg.epochs = 8;
    cfg.negatives = 16;
    cfg.batch_size = 64;
    cfg.lr = 0.1;
    let mut trainer = Trainer::new(cfg).unwrap();
    let untrained = trainer.evaluate_split(true).unwrap();
    let metrics = trainer.train().unwrap();
    let trained = metrics.last().unwrap().mrr.unwrap();
    assert!(
        trained > untrained + 0.05,
        "training did not improve MRR: {untrained} -> {trained}"
    );
}

#[test]
fn node_classification_trains_and_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let g = synth::labeled_graph(80, 800, 4, 0.85, 11);
    let tsv = dir.path().join("edges.tsv");
    write_graph_tsv(&g, &tsv);
    let labels_tsv = dir.path().join("labels.tsv");
    write_labels_tsv(&g, &labels_tsv);
    let opts = PreprocessOptions {
        p: PartitionCount::Explicit(4),
        mode: AssignMode::TrainFirst,
        dim: 8,
        seed: 11,
        labels: Some(labels_tsv),
        format: Format::Tsv3Col,
        ..Default::default()
    };
    preprocess(&tsv, &dir.path().join("data"), &opts).unwrap();

    let mut cfg = base_cfg(dir.path(), "out");
    cfg.task = Task::NodeClassification;
    cfg.aggregation = crate::engine::Aggregation::Sage;
    cfg.layers = 1;
    cfg.fanouts = vec![Fanout::Max(10)];
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.lr = 0.05;
    let mut trainer = Trainer::new(cfg).unwrap();
    let metrics = trainer.train().unwrap();
    let labels = read_labels(&dir.path().join("data")).unwrap().unwrap();
    assert_eq!(metrics[0].examples, labels.train.len() as u64);
    let acc = metrics.last().unwrap().accuracy.unwrap();
    assert!(acc > 0.0 && acc <= 1.0);
}

#[test]
fn disk_nc_uses_static_cache_when_training_fits() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = synth::labeled_graph(64, 600, 2, 0.8, 13);
    // Shrink the training set so it fits one partition.
    g.splits.labels.as_mut().unwrap().train.truncate(4);
    let tsv = dir.path().join("edges.tsv");
    write_graph_tsv(&g, &tsv);
    let labels_tsv = dir.path().join("labels.tsv");
    write_labels_tsv(&g, &labels_tsv);
    let opts = PreprocessOptions {
        p: PartitionCount::Explicit(16),
        mode: AssignMode::TrainFirst,
        dim: 8,
        seed: 13,
        labels: Some(labels_tsv),
        ..Default::default()
    };
    preprocess(&tsv, &dir.path().join("data"), &opts).unwrap();

    let mut cfg = base_cfg(dir.path(), "out");
    cfg.task = Task::NodeClassification;
    cfg.layers = 1;
    cfg.fanouts = vec![Fanout::Max(5)];
    cfg.storage = Storage::Disk;
    cfg.policy = Policy::Nc;
    cfg.l = Some(16);
    cfg.c = Some(4);
    cfg.epochs = 1;
    let mut trainer = Trainer::new(cfg).unwrap();
    let metrics = trainer.train().unwrap();
    // Static cache: one set, zero swaps.
    assert_eq!(metrics[0].num_sets, 1);
    assert_eq!(metrics[0].swap_count, 0);
}
