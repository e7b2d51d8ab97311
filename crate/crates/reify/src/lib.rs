//! Batch runner for the state-reification experiments: spec resolution,
//! seeded replications across a worker pool, matched-comparison statistics
//! and CSV output.

pub mod experiments;
pub mod output;
pub mod runner;
pub mod spec;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use experiments::{ExperimentDef, EXPERIMENTS};
pub use output::ResultRow;
pub use runner::{run, RunOutput};
pub use spec::{Condition, ExperimentId, ExperimentSpec, ResolvedSpec};
pub use stats::{sem_stats, Correction, SummaryRow};

/// Worker-count override for the cell pool.
pub const WORKERS_ENV: &str = "REIFY_WORKERS";

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] reify_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("statistics: {0}")]
    Stats(String),
    #[error("summary check failed: {0}")]
    Verify(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
