//! Single-machine, disk-aware GNN training toolkit.
//!
//! The crate is organized around the lifecycle of an out-of-core training
//! epoch: `graph` ingests edge lists and materializes partitioned edge
//! buckets on disk; `schedule` decides which partition sets visit memory and
//! which edge buckets train at each step; `buffer` holds the resident
//! partitions and serves embedding reads/writes; `sampler` builds
//! delta-encoded multi-hop neighborhood samples over the resident subgraph;
//! `engine` runs forward/backward passes and evaluation; `trainer` ties the
//! pieces together behind the CLI.

pub mod buffer;
pub mod engine;
pub mod error;
pub mod graph;
pub mod sampler;
pub mod schedule;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
