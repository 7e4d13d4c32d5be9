use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {rho} outside the evaluation domain [{lo}, {hi}]")]
    Domain { rho: f64, lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ODE integration failed at radius {last_good} (step size underflow)")]
    StepUnderflow { last_good: f64 },

    #[error("grid too coarse: {cells} cells (at least {min} required)")]
    GridTooCoarse { cells: usize, min: usize },

    #[error("sign contract violated at radius {rho}: residual {residual:e} beyond tolerance {tolerance:e}")]
    SignContract {
        rho: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("insufficient tail data: {0}")]
    InsufficientTail(String),

    #[error("Newton iteration did not converge ({iterations} iterations, residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
