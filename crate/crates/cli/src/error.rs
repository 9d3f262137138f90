use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Parse or validation failure, already anchored as `file:line: message`.
    #[error("{0}")]
    Config(String),

    #[error("{path}: config hash {found} does not match {expected} (use --force to override)")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Core(#[from] nlsdecay_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("unknown suite {name:?}; available: {available}")]
    UnknownSuite { name: String, available: String },

    #[error("suite {0} failed")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::HashMismatch { .. } | CliError::UnknownSuite { .. } => 2,
            CliError::Core(nlsdecay_core::Error::NumericAbort { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 4,
            CliError::VerifyFailed(_) => 1,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> CliError {
        CliError::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
