use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EpicError>;

#[derive(Debug, Error)]
pub enum EpicError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {0} outside the quantizer domain [-1, 1]")]
    DomainViolation(f64),

    #[error("could not place rect {placed} of {requested} after {attempts} attempts")]
    PlacementFailure {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("samples are already normalized")]
    AlreadyNormalized,

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("Q still not positive definite after {doublings} doublings (lambda0 = {lambda0:e})")]
    LambdaExhausted { doublings: usize, lambda0: f64 },

    #[error("fragment ids must be strictly increasing ({previous} then {next})")]
    UnorderedFragments { previous: u64, next: u64 },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: model file version v{found} is not supported (this build reads v{supported})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EpicError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EpicError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        EpicError::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Numeric failures (divergence, indefinite systems) as opposed to bad data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            EpicError::Divergence { .. }
                | EpicError::NotSymmetric { .. }
                | EpicError::LambdaExhausted { .. }
        )
    }
}
