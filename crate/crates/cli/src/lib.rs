//! Experiment runner: generate datasets, fit and train models, score them,
//! backtest volatility forecasts and emit report tables.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use manifest::RunManifest;
pub use pipeline::{run, RunOptions, RunOutcome, Stage};
pub use report::emit_report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("report error: {0}")]
    Report(String),
}

impl CliError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}
