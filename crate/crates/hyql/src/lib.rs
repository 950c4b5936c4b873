//! Experiment tooling around [`hyql_core`]: configuration files, the
//! flat-file store and checkpoints, run outputs, comparison and the parallel
//! runner behind the `hyql` binary.

pub mod compare;
pub mod config;
mod error;
pub mod export;
pub mod report;
pub mod runner;
pub mod store;

pub use error::{Error, Result};
