use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("inconsistent constraint system: {0}")]
    Inconsistent(String),

    #[error("cubature rejected: {0}")]
    BadCubature(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("non-positive mapping Jacobian {det:e} in element {element}")]
    NonPositiveJacobian { element: usize, det: f64 },

    #[error("inadmissible state in element {element}, node {node}: rho = {rho:e}, p = {p:e}")]
    Inadmissible {
        element: usize,
        node: usize,
        rho: f64,
        p: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("solution blew up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
