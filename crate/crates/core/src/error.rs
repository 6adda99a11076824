use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{num_qubits} qubits exceeds the dense limit of {max}")]
    TooManyQubits { num_qubits: usize, max: usize },

    #[error("measurement annihilated the state (squared norm {norm_sq:e})")]
    Annihilated { norm_sq: f64 },

    #[error("invalid Pauli term: {0}")]
    InvalidPauli(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outcome distribution has no probability mass")]
    EmptyDistribution,

    #[error("truncated probability mass {mass:e} exceeds the limit {limit:e}")]
    TruncationExceeded { mass: f64, limit: f64 },

    #[error("measurement operators belong to different stages")]
    MismatchedStages,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
