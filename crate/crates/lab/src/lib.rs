//! Experiment laboratory around `adlif-core`: a CLI exposing every analysis
//! and training experiment as a subcommand, with deterministic seeds,
//! CSV/JSON artifacts, and documented dataset/checkpoint formats.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod dataset;
pub mod manifest;

use std::fmt;
use std::process::ExitCode;

/// Top-level error with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, arguments, or missing files (exit code 2).
    Config(String),
    /// Numerical divergence during a run (exit code 3).
    Divergence(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Divergence(msg) => write!(f, "numerical divergence: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Runs the CLI; maps errors onto the documented exit codes
/// (0 success, 2 configuration error, 3 numerical divergence).
pub fn run() -> ExitCode {
    match cli::dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Divergence(msg)) => {
            eprintln!("diverged: {msg}");
            ExitCode::from(3)
        }
    }
}
