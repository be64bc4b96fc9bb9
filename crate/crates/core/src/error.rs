use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix (pivot {pivot:.3e} below threshold)")]
    SingularMatrix { pivot: f64 },

    #[error("root iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("quadratic form is not positive definite (eigenvalues {0:?})")]
    NotPositiveDefinite([f64; 2]),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value produced at t = {t:.6} s")]
    NonFinite { t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Input problems (bad files, violated invariants) as opposed to
    /// failures that happen while running a valid configuration.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::Config(_) | Error::Csv { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
