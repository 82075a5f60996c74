//! Command-line orchestration for the blockgrad experiments: config parsing,
//! presets, runners that write CSV artifacts, and a self-test suite.

pub mod config;
pub mod run;
pub mod selftest;

use std::path::PathBuf;

pub use config::{parse_config, parse_config_with, Experiment, Job, Overrides, Preset, RunConfig};
pub use run::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] blockgrad::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run failed: {0}")]
    Run(blockgrad::Error),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    /// 0 ok, 1 assertion failure, 2 usage error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) | CliError::Run(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
