//! Experiment runner behind the `lightcone-lab` binary: JSON configs, CSV/JSON outputs and
//! content-addressed run manifests.

pub mod config;
pub mod experiments;
pub mod output;
pub mod summary;

pub use config::{load_config, load_config_str, Experiment, ExperimentConfig, Params};
pub use experiments::{run_experiment, Check, FileDigest, RunManifest};
pub use output::{write_series, write_json};
pub use summary::summary;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
  #[error("{0}")]
  Config(String),
  #[error("range error: {0}")]
  Range(String),
  #[error("{experiment}: {source}")]
  Module {
    experiment: String,
    #[source]
    source: lightcone_core::Error,
  },
  #[error("row {row} has {got} values, schema has {want}")]
  Arity { row: usize, got: usize, want: usize },
  #[error("io: {0}")]
  Io(String),
}

/// Process exit codes.
pub mod exit {
  pub const OK: u8 = 0;
  /// The run finished but a threshold check failed.
  pub const CHECK_FAILED: u8 = 1;
  /// Unreadable config or command line.
  pub const USAGE: u8 = 2;
  pub const RANGE: u8 = 3;
  pub const MODULE: u8 = 4;
  pub const IO: u8 = 5;
}

impl CliError {
  pub fn exit_code(&self) -> u8 {
    match self {
      CliError::Config(_) => exit::USAGE,
      CliError::Range(_) => exit::RANGE,
      CliError::Module { .. } => exit::MODULE,
      CliError::Arity { .. } | CliError::Io(_) => exit::IO,
    }
  }
}
