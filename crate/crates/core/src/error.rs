use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not unit norm (norm = {norm})")]
    NotUnit { norm: f64 },

    #[error("antipodal points: transport direction is undefined")]
    Antipodal,

    #[error("empty input")]
    Empty,

    #[error("weights must have a positive sum (got {0})")]
    NonPositiveWeightSum(f64),

    #[error("Fréchet mean did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("bandwidth {h} is too small for the design (sigma^2 = {sigma2:e})")]
    DegenerateBandwidth { h: f64, sigma2: f64 },

    #[error("Toeplitz autocovariance matrix is singular or ill-conditioned (condition number {0:e})")]
    Singular(f64),

    #[error("pairwise distance {0} exceeds the hemisphere bound")]
    OutsideHemisphere(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Antipodal
            | Error::NoConvergence(_)
            | Error::DegenerateBandwidth { .. }
            | Error::Singular(_)
            | Error::OutsideHemisphere(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}
