use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown test function `{0}`")]
    UnknownFunction(String),
    #[error("unsupported dimension {0}; supported dimensions are 2, 3, 5 and 10")]
    UnsupportedDimension(usize),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("point outside the search space at coordinate {index}: {value}")]
    OutOfBounds { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Cholesky factorization of the covariance matrix failed. Training
    /// reacts to this variant by switching the nugget on.
    #[error("covariance factorization failed")]
    Factorization,
    #[error("not enough observations: {have} points for {need} trend coefficients")]
    InsufficientData { have: usize, need: usize },
    #[error("model training failed: {0}")]
    Training(String),
    #[error("unknown configuration `{0}`")]
    UnknownConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate normalization: reference and random performance are equal")]
    DegenerateDenominator,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("provenance mismatch: {0}")]
    Provenance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
