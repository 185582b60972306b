//! Batch front end: configuration, subcommand orchestration and run output.

pub mod config;
pub mod report;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Period, RunConfig};
pub use run::{execute, Command, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("input error: {0}")]
    Input(String),
    #[error("{module}: {message}")]
    Analysis { module: &'static str, message: String },
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status; 2 is left to argument-parsing errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::MissingInput(_) => 4,
            CliError::Input(_) => 5,
            CliError::Analysis { .. } => 6,
            CliError::Output(_) => 7,
        }
    }

    pub(crate) fn analysis(module: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Analysis {
            module,
            message: e.to_string(),
        }
    }
}

impl From<fixlab_core::ingest::IngestError> for CliError {
    fn from(e: fixlab_core::ingest::IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}
