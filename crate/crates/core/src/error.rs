use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{func}: argument outside the domain ({detail})")]
    Domain { func: &'static str, detail: String },

    #[error("{func}: no convergence after {iterations} iterations")]
    NoConvergence { func: &'static str, iterations: usize },

    #[error("inverse saturated: y = {y:e} requires z beyond the cap {cap}")]
    Saturated { y: f64, cap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate ensemble variance {0:e}")]
    DegenerateVariance(f64),

    #[error("basis is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("step {index} out of range for a trajectory with {len} steps")]
    StepOutOfRange { index: usize, len: usize },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { func, detail: detail.into() }
    }

    pub(crate) fn invalid(detail: impl Into<String>) -> Self {
        Error::InvalidParameter(detail.into())
    }
}
