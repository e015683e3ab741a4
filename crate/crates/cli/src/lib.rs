//! Batch front-end for the Poisson-chaos toolkit: experiment configs, the
//! built-in studies, CSV/JSON/columnar persistence and log-log rate fitting.
//!
//! Everything the `pchaos` binary does is reachable through this library so
//! the acceptance suite can drive studies in-process.

pub mod builtins;
pub mod config;
pub mod csvout;
pub mod identity;
pub mod pchs;
pub mod ratefit;
pub mod runner;
pub mod studies;

/// Harness-level error: a message plus an exit-code hint.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn new(message: impl Into<String>) -> Self {
        CliError { message: message.into(), exit_code: 1 }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError { message: message.into(), exit_code: 2 }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pchaos_core::Error> for CliError {
    fn from(e: pchaos_core::Error) -> Self {
        CliError::new(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
