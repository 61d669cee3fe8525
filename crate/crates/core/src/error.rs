use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel is singular at distance 0 (the limit covariance is infinite on the diagonal)")]
    Singular,
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("inverse temperature must lie in (0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("covariance matrix not factorizable with jitter up to {max_jitter:e}")]
    Factorization { max_jitter: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("measures or fields live on different grids")]
    GridMismatch,
    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),
    #[error("empty sample")]
    EmptySample,
    #[error("negative sample {0} with fractional exponent")]
    NegativeSample(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
