use thiserror::Error;

/// Errors raised by kernels, embeddings, solvers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-positive input {0} to a log-domain kernel")]
    NonPositiveInput(f64),

    #[error("Stein kernels cannot be nested")]
    NestedStein,

    #[error("unsupported kernel/measure combination: {0}")]
    UnsupportedPair(String),

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("negative posterior variance {0:e}")]
    NegativeVariance(f64),

    #[error("degenerate targets: standard deviation is zero")]
    DegenerateTargets,

    #[error("empty input")]
    EmptyInput,

    #[error("zero proposal density at a sample")]
    ZeroDensity,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("tolerance {tol:e} not reached within node budget (estimate {estimate:e})")]
    ToleranceNotReached { tol: f64, estimate: f64 },

    #[error("size cap exceeded: {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("all grid cells failed")]
    GridExhausted,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
