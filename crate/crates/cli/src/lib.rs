//! Library half of the `modeshift` binary: configuration loading, the staged
//! scenario pipeline, reporting, and the bundled-fixture generator. The thin
//! `main.rs` only parses arguments and maps errors to exit codes.

pub mod chart;
pub mod config;
pub mod fixtures;
pub mod manifest;
pub mod pipeline;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Input problems: bad config, unreadable or inconsistent input files.
    /// Every line is one independent diagnostic. Exit code 2.
    #[error("{}", .0.join("\n"))]
    Validation(Vec<String>),
    /// Failure while computing or writing outputs. Exit code 1.
    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    pub fn runtime(stage: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Runtime { stage, message: err.to_string() }
    }
}
