//! Batch experiments: TOML configs, replica fan-out with deterministic
//! seeding, CSV/JSON artifacts and report merging.

mod config;
mod report;
mod run;

pub use config::{
    parse_config, DecayConfig, ExperimentConfig, ExperimentKind, ExperimentParams, FieldError, ModelConfig,
    NumericsConfig, RunConfig, TriangleSpec,
};
pub use report::{report, Report, ReportRow};
pub use run::{run_experiment, ReplicaFailure, ReplicaSeed, RunManifest, SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl ExperimentError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    parse_config(&text)
}
