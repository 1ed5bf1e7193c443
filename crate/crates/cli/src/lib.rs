//! Library half of the `hexlab` binary.
//!
//! Every subcommand is a plain function over a [`hexlab_core::store::RunStore`]
//! so integration tests can drive the whole pipeline in-process; `main.rs`
//! is a thin clap shell that maps [`CliError`] to process exit codes.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod report;

use hexlab_core::arena::ArenaError;
use hexlab_core::scaling::ScalingError;
use hexlab_core::store::StoreError;
use hexlab_core::trainer::TrainError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes: 0 success, 2 config error, 3 missing artifact, 4 numeric
/// failure. Anything else (I/O, corruption) exits 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    Missing(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> CliError {
        match e {
            StoreError::Missing(m) => CliError::Missing(m),
            StoreError::BadName(_) | StoreError::RunExists(_) => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::Config(m) => CliError::Config(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<ArenaError> for CliError {
    fn from(e: ArenaError) -> CliError {
        match e {
            ArenaError::NoConvergence => CliError::Numeric(e.to_string()),
            ArenaError::Config(_)
            | ArenaError::BadId(_)
            | ArenaError::DuplicateId(_)
            | ArenaError::UnknownId(_)
            | ArenaError::BoardUnsupported { .. } => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> CliError {
        match e {
            ScalingError::Degenerate(_) | ScalingError::NoConvergence(_) => {
                CliError::Numeric(e.to_string())
            }
            ScalingError::Config(m) => CliError::Config(m),
            ScalingError::Arena(a) => a.into(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Internal(format!("json: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Internal(format!("io: {e}"))
    }
}
