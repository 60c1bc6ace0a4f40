//! Crate-wide error type and result alias.
//!
//! Errors fall into two coarse classes that the CLI maps onto exit codes:
//! problems with user-supplied inputs (bad files, bad flag combinations,
//! mismatched shapes — exit code 2) and runtime failures (I/O, non-finite
//! numbers mid-computation — exit code 1).

use std::path::PathBuf;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A data file could not be parsed. Carries the offending line (1-based).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally valid input that violates a domain rule
    /// (e.g. an interaction referencing an item with no graph entity).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller passed inconsistent arguments (shape mismatch, bad ratio, …).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A checkpoint does not match the graph/config it is being used with.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    /// A computation produced NaN/Inf where a finite number was required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::InvalidArgument(_)
                | Error::CheckpointMismatch(_)
        )
    }
}
