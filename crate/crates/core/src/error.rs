use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in matrix or vector")]
    NonFinite,

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("pair is not reachable (sigma_min of reachability matrix = {0:e})")]
    NotReachable(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("epsilon {eps} out of range: {reason}")]
    EpsilonOutOfRange { eps: f64, reason: String },

    #[error("no positive critical radius exists: {0}")]
    DegenerateRadius(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("Monte Carlo estimate failed: {0}")]
    MonteCarlo(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("search cap exceeded: {0}")]
    CapExceeded(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
