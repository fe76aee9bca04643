//! C ABI over the training toolkit: opaque handles, integer status codes,
//! and JSON strings for structured results. The header is generated into
//! `include/oocgnn.h` at build time.
//!
//! Conventions: functions return `OocgnnStatus`; anything non-zero leaves a
//! message retrievable with `oocgnn_last_error`. Strings returned through
//! `char**` out-parameters are owned by the caller and released with
//! `oocgnn_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use oocgnn::engine::{
    evaluate_lp, evaluate_nc, full_graph_representations, load_checkpoint, EvalMode, Matrix, Task,
};
use oocgnn::error::Error;
use oocgnn::graph::{AssignMode, Direction, EdgeBucketStore, Format, InMemorySubgraph, RecordWidth};
use oocgnn::sampler::{multi_hop_sample, Fanout, SamplerConfig};
use oocgnn::schedule::autotune;
use oocgnn::trainer::{
    policy_bias, preprocess, read_eval_edges, read_labels, PartitionCount, PreprocessOptions,
    TrainConfig, Trainer,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OocgnnStatus {
    Ok = 0,
    NullPointer = 1,
    Utf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Integrity = 6,
    Schedule = 7,
    Train = 8,
    Config = 9,
    Memory = 10,
    Internal = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn status_of(err: &Error) -> OocgnnStatus {
    match err {
        Error::Io(_) => OocgnnStatus::Io,
        Error::Parse { .. } | Error::NoEdges | Error::IdOverflow { .. } => OocgnnStatus::Parse,
        Error::InvalidArgument(_)
        | Error::DuplicateTarget(_)
        | Error::NonResidentNode(_)
        | Error::NonResidentPartition(_)
        | Error::ClosureViolation(_) => OocgnnStatus::InvalidArgument,
        Error::ScheduleBug(_) => OocgnnStatus::Schedule,
        Error::Integrity(_) => OocgnnStatus::Integrity,
        Error::Config(_) => OocgnnStatus::Config,
        Error::Train(_) => OocgnnStatus::Train,
        Error::InsufficientMemory { .. } => OocgnnStatus::Memory,
    }
}

fn fail(err: Error) -> OocgnnStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

/// Message for the most recent failure on this thread. Borrowed; valid until
/// the next failing call.
#[no_mangle]
pub extern "C" fn oocgnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned through a `char**` out-parameter.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, OocgnnStatus> {
    str_arg(ptr).map(PathBuf::from)
}

unsafe fn str_arg(ptr: *const c_char) -> Result<String, OocgnnStatus> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(OocgnnStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => {
            set_error("argument is not valid UTF-8");
            Err(OocgnnStatus::Utf8)
        }
    }
}

fn out_string(out: *mut *mut c_char, value: String) -> OocgnnStatus {
    if out.is_null() {
        set_error("null output pointer");
        return OocgnnStatus::NullPointer;
    }
    let cleaned: String = value.chars().filter(|&c| c != '\0').collect();
    unsafe { *out = CString::new(cleaned).unwrap().into_raw() };
    OocgnnStatus::Ok
}

/// Opaque handle to an opened dataset directory.
pub struct OocgnnStore {
    store: EdgeBucketStore,
}

/// Ingest an edge list (file or train/valid/test directory) and build the
/// partitioned store. `p = 0` auto-tunes the partition count;
/// `labels_or_null` may point at a labels TSV for node classification.
///
/// # Safety
/// String arguments must be valid NUL-terminated UTF-8 (or null where
/// documented).
#[no_mangle]
pub unsafe extern "C" fn oocgnn_preprocess(
    input: *const c_char,
    out_dir: *const c_char,
    format: *const c_char,
    mode: *const c_char,
    p: u32,
    dim: usize,
    seed: u64,
    wide_ids: bool,
    labels_or_null: *const c_char,
) -> OocgnnStatus {
    let (input, out_dir, format, mode) = match (|| {
        Ok::<_, OocgnnStatus>((
            unsafe { path_arg(input)? },
            unsafe { path_arg(out_dir)? },
            unsafe { str_arg(format)? },
            unsafe { str_arg(mode)? },
        ))
    })() {
        Ok(v) => v,
        Err(s) => return s,
    };
    let labels = if labels_or_null.is_null() {
        None
    } else {
        match unsafe { path_arg(labels_or_null) } {
            Ok(p) => Some(p),
            Err(s) => return s,
        }
    };
    let opts = (|| {
        Ok(PreprocessOptions {
            format: Format::from_name(&format)?,
            p: if p == 0 { PartitionCount::Auto } else { PartitionCount::Explicit(p) },
            mode: AssignMode::from_name(&mode)?,
            dim,
            seed,
            width: if wide_ids { RecordWidth::U64 } else { RecordWidth::U32 },
            labels,
        })
    })();
    let opts = match opts {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    match preprocess(&input, &out_dir, &opts) {
        Ok(_) => OocgnnStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Open a preprocessed dataset; the handle must be released with
/// `oocgnn_store_close`.
///
/// # Safety
/// `dir` must be valid UTF-8 and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_store_open(
    dir: *const c_char,
    out: *mut *mut OocgnnStore,
) -> OocgnnStatus {
    let dir = match unsafe { path_arg(dir) } {
        Ok(d) => d,
        Err(s) => return s,
    };
    if out.is_null() {
        set_error("null output pointer");
        return OocgnnStatus::NullPointer;
    }
    match EdgeBucketStore::open(&dir) {
        Ok(store) => {
            unsafe { *out = Box::into_raw(Box::new(OocgnnStore { store })) };
            OocgnnStatus::Ok
        }
        Err(e) => {
            unsafe { *out = ptr::null_mut() };
            fail(e)
        }
    }
}

/// # Safety
/// `store` must come from `oocgnn_store_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_store_close(store: *mut OocgnnStore) {
    if !store.is_null() {
        drop(unsafe { Box::from_raw(store) });
    }
}

macro_rules! store_getter {
    ($name:ident, $ty:ty, $expr:expr) => {
        /// # Safety
        /// `store` must be a live handle from `oocgnn_store_open`.
        #[no_mangle]
        pub unsafe extern "C" fn $name(store: *const OocgnnStore) -> $ty {
            if store.is_null() {
                return 0 as $ty;
            }
            let s = unsafe { &(*store).store };
            #[allow(clippy::redundant_closure_call)]
            ($expr)(s)
        }
    };
}

store_getter!(oocgnn_store_num_nodes, u64, |s: &EdgeBucketStore| s.num_nodes as u64);
store_getter!(oocgnn_store_num_edges, u64, |s: &EdgeBucketStore| s.num_edges);
store_getter!(oocgnn_store_num_relations, u32, |s: &EdgeBucketStore| s.num_relations);
store_getter!(oocgnn_store_partitions, u32, |s: &EdgeBucketStore| s.p);
store_getter!(oocgnn_store_dim, usize, |s: &EdgeBucketStore| s.dim);

/// Auto-tuned (p, l, c) plan for the opened dataset as a JSON string.
///
/// # Safety
/// `store` must be live; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_plan_json(
    store: *const OocgnnStore,
    cpu_bytes: u64,
    block_bytes: u64,
    fudge_bytes: u64,
    out_json: *mut *mut c_char,
) -> OocgnnStatus {
    if store.is_null() {
        set_error("null store handle");
        return OocgnnStatus::NullPointer;
    }
    let s = unsafe { &(*store).store };
    match autotune(
        s.num_nodes as u64,
        s.num_edges,
        s.dim,
        s.width.bytes_per_edge(),
        cpu_bytes,
        block_bytes,
        fudge_bytes,
    ) {
        Ok(plan) => out_string(out_json, serde_json::to_string(&plan).expect("plan serializes")),
        Err(e) => fail(e),
    }
}

/// Edge-permutation bias of one epoch of the named policy ("comet", "beta",
/// or "nc") as a JSON report. `l = 0` and `c = 0` pick defaults.
///
/// # Safety
/// `store` must be live; strings valid; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_bias_json(
    store: *const OocgnnStore,
    policy: *const c_char,
    seed: u64,
    l: u32,
    c: u32,
    out_json: *mut *mut c_char,
) -> OocgnnStatus {
    if store.is_null() {
        set_error("null store handle");
        return OocgnnStatus::NullPointer;
    }
    let policy = match unsafe { str_arg(policy) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let s = unsafe { &(*store).store };
    let l = (l != 0).then_some(l);
    let c = (c != 0).then_some(c);
    match policy_bias(s, &policy, seed, l, c, false) {
        Ok(report) => out_string(out_json, serde_json::to_string(&report).expect("report serializes")),
        Err(e) => fail(e),
    }
}

/// Multi-hop sample of `targets` over the full graph, returned as the
/// five-array JSON object. `fanouts_csv` is a comma list of integers or
/// "all" tokens; its length sets the hop count.
///
/// # Safety
/// `store` must be live; `targets` must point at `n_targets` ids; strings
/// valid; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_sample_json(
    store: *const OocgnnStore,
    targets: *const u32,
    n_targets: usize,
    fanouts_csv: *const c_char,
    direction: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> OocgnnStatus {
    if store.is_null() || (targets.is_null() && n_targets > 0) {
        set_error("null pointer argument");
        return OocgnnStatus::NullPointer;
    }
    let (fanouts_csv, direction) = match (|| {
        Ok::<_, OocgnnStatus>((unsafe { str_arg(fanouts_csv)? }, unsafe { str_arg(direction)? }))
    })() {
        Ok(v) => v,
        Err(s) => return s,
    };
    let s = unsafe { &(*store).store };
    let targets = unsafe { std::slice::from_raw_parts(targets, n_targets) };
    let result = (|| {
        let fanouts = if fanouts_csv.is_empty() {
            vec![]
        } else {
            fanouts_csv
                .split(',')
                .map(|t| Fanout::from_name(t.trim()))
                .collect::<Result<Vec<_>, _>>()?
        };
        let direction = Direction::from_name(&direction)?;
        let all: Vec<u32> = (0..s.p).collect();
        let sub = InMemorySubgraph::load(s, &all)?;
        let mut sample =
            multi_hop_sample(&sub, targets, &SamplerConfig { fanouts, direction, seed })?;
        sample.build_repr_map()?;
        Ok::<_, Error>(sample.to_json())
    })();
    match result {
        Ok(json) => out_string(out_json, json),
        Err(e) => fail(e),
    }
}

/// Train from a key=value config file with optional `key=value` overrides.
///
/// # Safety
/// `config` must be valid UTF-8; `overrides` must point at `n_overrides`
/// valid strings (may be null when `n_overrides` is 0).
#[no_mangle]
pub unsafe extern "C" fn oocgnn_train(
    config: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
) -> OocgnnStatus {
    let config = match unsafe { path_arg(config) } {
        Ok(c) => c,
        Err(s) => return s,
    };
    let mut override_strs = Vec::with_capacity(n_overrides);
    if n_overrides > 0 {
        if overrides.is_null() {
            set_error("null overrides pointer");
            return OocgnnStatus::NullPointer;
        }
        for i in 0..n_overrides {
            match unsafe { str_arg(*overrides.add(i)) } {
                Ok(s) => override_strs.push(s),
                Err(s) => return s,
            }
        }
    }
    let result = (|| {
        let mut cfg = TrainConfig::from_file(&config)?;
        cfg.apply_overrides(&override_strs)?;
        let mut trainer = Trainer::new(cfg)?;
        trainer.train()?;
        Ok::<_, Error>(())
    })();
    match result {
        Ok(()) => OocgnnStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Evaluate a checkpoint against a dataset's test split. Writes the MRR
/// (link prediction) or accuracy (classification) to `out_value`.
///
/// # Safety
/// Paths must be valid UTF-8; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn oocgnn_evaluate(
    checkpoint: *const c_char,
    dataset: *const c_char,
    mode: *const c_char,
    out_value: *mut f64,
) -> OocgnnStatus {
    let (checkpoint, dataset, mode) = match (|| {
        Ok::<_, OocgnnStatus>((
            unsafe { path_arg(checkpoint)? },
            unsafe { path_arg(dataset)? },
            unsafe { str_arg(mode)? },
        ))
    })() {
        Ok(v) => v,
        Err(s) => return s,
    };
    if out_value.is_null() {
        set_error("null output pointer");
        return OocgnnStatus::NullPointer;
    }
    match evaluate_checkpoint(&checkpoint, &dataset, &mode) {
        Ok(v) => {
            unsafe { *out_value = v };
            OocgnnStatus::Ok
        }
        Err(e) => fail(e),
    }
}

fn evaluate_checkpoint(checkpoint: &Path, dataset: &Path, mode: &str) -> Result<f64, Error> {
    let mode = EvalMode::from_name(mode)?;
    let store = EdgeBucketStore::open(dataset)?;
    let ckpt = load_checkpoint(checkpoint)?;
    if ckpt.model.cfg.num_nodes != store.num_nodes {
        return Err(Error::InvalidArgument(format!(
            "checkpoint has {} nodes, dataset has {}",
            ckpt.model.cfg.num_nodes, store.num_nodes
        )));
    }
    let all: Vec<u32> = (0..store.p).collect();
    let sub = InMemorySubgraph::load(&store, &all)?;
    let reprs = full_graph_representations(&ckpt.model, &sub, &ckpt.embeddings, Direction::Both)?;
    match ckpt.model.cfg.task {
        Task::LinkPrediction => {
            let (_, test) = read_eval_edges(dataset)?;
            if test.is_empty() {
                return Err(Error::InvalidArgument("dataset has no test edges".into()));
            }
            Ok(evaluate_lp(&reprs, &ckpt.model.rel_emb, &test, mode, 0))
        }
        Task::NodeClassification => {
            let labels = read_labels(dataset)?
                .ok_or_else(|| Error::InvalidArgument("dataset has no labels".into()))?;
            let mut rows = Matrix::zeros(labels.test.len(), ckpt.model.cfg.dim);
            for (i, &(node, _)) in labels.test.iter().enumerate() {
                rows.row_mut(i).copy_from_slice(reprs.row(node as usize));
            }
            evaluate_nc(&rows, &ckpt.model, &labels.test)
        }
    }
}
