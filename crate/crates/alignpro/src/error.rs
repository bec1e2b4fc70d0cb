use thiserror::Error;

/// Errors surfaced by the alignpro library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("all weights are zero")]
    AllZero,
    #[error("non-finite value encountered: {0}")]
    NonFinite(f64),
    #[error("negative weight encountered: {0}")]
    Negative(f64),
    #[error("probability vector sums to {sum}, outside the 1e-6 construction tolerance")]
    NotNormalized { sum: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("temperature must be positive and finite, got {0}")]
    NonPositiveTemperature(f64),
    #[error("empty input")]
    Empty,
    #[error("preference dataset is empty")]
    EmptyDataset,
    #[error("requested pair count must be at least 1")]
    CountZero,
    #[error("gradient descent diverged: loss increased for {0} consecutive steps")]
    Divergence(usize),
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
