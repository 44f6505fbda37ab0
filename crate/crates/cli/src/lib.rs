//! Command-line harness: configuration, experiment execution, verification
//! suites, and CSV / key-value output.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "NNPART_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration (or something it points to) is invalid. Exit 2.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The experiment failed while running. Exit 3.
    #[error("runtime failure: {0}")]
    Runtime(#[from] nnpart::Error),

    /// An output file could not be written. Exit 3.
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// A library error raised while setting an experiment up is a
    /// configuration problem.
    pub fn from_setup(e: nnpart::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }
}
