use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: malformed line: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("no edges in input")]
    NoEdges,

    #[error("id {id} exceeds 32-bit id space; re-run with the 64-bit record width")]
    IdOverflow { id: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {0} is not resident in the in-memory subgraph")]
    NonResidentNode(u64),

    #[error("partition {0} is not resident")]
    NonResidentPartition(u32),

    #[error("duplicate target node {0}")]
    DuplicateTarget(u64),

    #[error("neighbor id {0} missing from node_ids (closure violation)")]
    ClosureViolation(u64),

    #[error("schedule bug: {0}")]
    ScheduleBug(String),

    #[error("store integrity: {0}")]
    Integrity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    Train(String),

    #[error(
        "insufficient memory for disk mode at p={p}; smallest feasible partition count is p={suggested_p}"
    )]
    InsufficientMemory { p: u32, suggested_p: u32 },
}
