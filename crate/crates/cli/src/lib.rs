//! Experiment runner behind the `afclab` command.

pub mod config;
pub mod emit;
mod run;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Kind};
pub use run::{run_experiment, RunOutcome, OUTPUT_DIR_ENV};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Io { .. } | CliError::Internal(_) => exit::IO,
        }
    }
}

impl From<afclab_core::pipeline::PipelineError> for CliError {
    fn from(e: afclab_core::pipeline::PipelineError) -> Self {
        CliError::Config(format!("pipeline: {e}"))
    }
}

impl From<afclab_core::analysis::AnalysisError> for CliError {
    fn from(e: afclab_core::analysis::AnalysisError) -> Self {
        CliError::Config(format!("analysis: {e}"))
    }
}

impl From<afclab_core::codec::CodecError> for CliError {
    fn from(e: afclab_core::codec::CodecError) -> Self {
        use afclab_core::codec::CodecError as E;
        match e {
            E::NonFinite(m) => CliError::Numerical(format!("codec: {m}")),
            other => CliError::Config(format!("codec: {other}")),
        }
    }
}

impl From<afclab_core::neural::NeuralError> for CliError {
    fn from(e: afclab_core::neural::NeuralError) -> Self {
        use afclab_core::neural::NeuralError as E;
        match e {
            E::NonFinite(m) => CliError::Numerical(format!("neural: {m}")),
            E::Io(source) => CliError::Io { path: PathBuf::from("<checkpoint>"), source },
            other => CliError::Config(format!("neural: {other}")),
        }
    }
}

impl From<afclab_core::training::TrainError> for CliError {
    fn from(e: afclab_core::training::TrainError) -> Self {
        use afclab_core::training::TrainError as E;
        match e {
            E::NonFinite { .. } => CliError::Numerical(format!("training: {e}")),
            E::Neural(n) => n.into(),
            E::Codec(c) => c.into(),
            E::Config(m) => CliError::Config(format!("training: {m}")),
        }
    }
}
