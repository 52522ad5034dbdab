use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI command, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{0}")]
    Data(String),
    #[error("invalid input: {0}")]
    Input(#[source] mpg_core::Error),
    #[error("solver failed: {0}")]
    Solver(#[source] mpg_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Self::Format { path: path.into(), reason: reason.into() }
    }

    /// 1 usage error, 2 data error, 3 solver failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Io { .. } | Self::Format { .. } | Self::Data(_) | Self::Input(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

/// Configuration problems are usage errors; everything else raised while
/// solving counts as a solver failure.
pub(crate) fn from_solve(e: mpg_core::Error) -> CliError {
    match e {
        mpg_core::Error::InvalidConfig(msg) => CliError::Usage(msg),
        mpg_core::Error::ShapeMismatch { .. } | mpg_core::Error::NegativeIntensity { .. } => CliError::Input(e),
        other => CliError::Solver(other),
    }
}

pub type CliResult<T> = Result<T, CliError>;
