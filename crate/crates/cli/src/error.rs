use std::path::PathBuf;

use lqt_core::LqtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Numerical(#[from] LqtError),

    #[error("{} acceptance band(s) failed: {}", .0.len(), .0.join(", "))]
    BandFailure(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 for bad input or I/O, 2 for numerical
    /// failures, 3 for acceptance-band failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } | CliError::Parse { .. } => 1,
            CliError::Numerical(LqtError::Csv(_) | LqtError::Format(_)) => 1,
            CliError::Numerical(_) => 2,
            CliError::BandFailure(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
