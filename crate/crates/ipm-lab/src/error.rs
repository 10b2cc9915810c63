//! Crate-wide error type with CLI exit-code classification.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration. `key` is the offending key
    /// path (dotted), so callers can point at the exact config line.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A numerical invariant broke (non-finite value, degenerate denominator,
    /// corrupted density grid, ...).
    #[error("numerical error in {context}: {message}")]
    Numerical { context: String, message: String },

    /// An individual left the objective's domain box.
    #[error("individual {index} at {point:?} is outside the domain box")]
    OutOfDomain { index: usize, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn numerical(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration/environment
    /// problems, 3 for numerical failures mid-run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io { .. } => 2,
            Error::Numerical { .. }
            | Error::OutOfDomain { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_) => 3,
        }
    }
}
