use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e}, tolerance {tolerance:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("unknown hyperparameter `{0}`")]
    UnknownHyperparameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("likelihood gradient has imaginary residue {residue:.3e} for `{id}`")]
    GradientNotReal { id: String, residue: f64 },

    #[error("numerical failure at hyperparameters [{params}]: {source}")]
    AtParameters {
        params: String,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure in seed {seed}: {source}")]
    AtSeed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical kind (as opposed to configuration or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotHermitian { .. } | Error::NotPositiveDefinite { .. } | Error::GradientNotReal { .. } => true,
            Error::AtParameters { source, .. } | Error::AtSeed { source, .. } => source.is_numerical(),
            _ => false,
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
