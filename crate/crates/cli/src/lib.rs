//! Experiment harness for the `liebrob` library: configuration, sweeps,
//! verification against the tail bounds and flat-file output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiments::{run, RunOptions, RunOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
    #[error("could not parse configuration: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] liebrob::Error),
    #[error("{0}")]
    Mismatch(String),
}
