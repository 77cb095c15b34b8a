//! Experiment orchestration for `scrn-core`: configuration files, seeded
//! multi-instance runs, quantile bands across instances and CSV/JSON output.

pub mod aggregate;
pub mod bench;
pub mod config;
pub mod emit;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use aggregate::{aggregate_ci, quantile, AggregatePoint, AggregateSeries};
pub use config::{load_config, parse_config, ExperimentConfig};
pub use emit::{emit, format_float, Manifest};
pub use run::{run_experiment, ExperimentOutput, RunRecord, RunRow};

/// A configuration problem, located by its field path (`algorithm.n1`).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no runs to aggregate")]
    EmptyInput,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} instances failed; first: {first}")]
    InstancesFailed {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl HarnessError {
    /// 2 for configuration problems, 3 for everything that happens at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
