use std::path::PathBuf;

use mulprobe_core::backend::BackendError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, bad input files or failed verification.
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Capability(String),

    #[error("{failed} of {total} items failed (limit {limit})")]
    PartialFailure { failed: usize, total: usize, limit: f64 },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error(transparent)]
    Core(mulprobe_core::Error),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        Self::Io { path: path.into(), message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Capability(_) => 3,
            Self::PartialFailure { .. } => 4,
            Self::Io { .. } => 1,
            Self::Core(e) => match e {
                mulprobe_core::Error::Invalid(_) | mulprobe_core::Error::Config(_) => 2,
                mulprobe_core::Error::Backend(BackendError::Capability { .. }) => 3,
                _ => 1,
            },
        }
    }
}

impl From<mulprobe_core::Error> for CliError {
    fn from(e: mulprobe_core::Error) -> Self {
        match e {
            mulprobe_core::Error::Backend(BackendError::Capability { .. }) => Self::Capability(e.to_string()),
            e => Self::Core(e),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        mulprobe_core::Error::from(e).into()
    }
}

pub type CliResult<T> = Result<T, CliError>;
