use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum PcrError {
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("component count K = {k} out of range 1..={max}")]
    ComponentCount { k: usize, max: usize },

    #[error("rank deficient: sample eigenvalue {k} is {value:e}, below {threshold:e}")]
    RankDeficient { k: usize, value: f64, threshold: f64 },

    #[error("cross moment is not in the range of the covariance (residual {residual:e})")]
    InconsistentMoments { residual: f64 },

    #[error("every sampled direction is null for the covariance")]
    DegenerateDirections,

    #[error("insufficient data: {usable} usable cells, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for PcrError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        PcrError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PcrError>;
