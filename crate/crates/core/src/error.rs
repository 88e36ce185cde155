use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the clustering library.
///
/// Variants fall into three families (I/O, validation, algorithmic); see
/// [`Error::category`], which the CLI maps to its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("distance matrix of {n} points exceeds the cap of {cap} entries")]
    TooLarge { n: usize, cap: usize },

    #[error("no crack defined: subset has {0} point(s)")]
    NoCrack(usize),

    #[error("inconsistent crack location: {0}")]
    InconsistentCrack(String),

    #[error("fission did not terminate after {0} splits")]
    NonTermination(usize),

    #[error("over-denoised: only {remaining} point(s) left at r = {r}")]
    OverDenoised { remaining: usize, r: f64 },
}

/// Coarse error family, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Validation,
    Algorithmic,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::Invalid(_)
            | Error::TooLarge { .. } => ErrorCategory::Validation,
            Error::NoCrack(_)
            | Error::InconsistentCrack(_)
            | Error::NonTermination(_)
            | Error::OverDenoised { .. } => ErrorCategory::Algorithmic,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
