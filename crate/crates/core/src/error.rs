use thiserror::Error;

/// Errors raised by model handling, the solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("class index {index} out of range for a model with {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("closed form requires K=2, model has K={0}")]
    NotBinary(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("line search failed at iteration {iteration}: {reason}")]
    LineSearchFailed { iteration: usize, reason: String },

    #[error("factorization of the {0}x{0} reduced system failed")]
    Factorization(usize),

    #[error("rank-one denominator {0:e} is not positive")]
    Breakdown(f64),

    #[error("solver did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("monotonicity violated: {0}")]
    NonMonotone(String),

    #[error("path aborted after {completed} of {total} grid points: {source}")]
    PathAborted {
        completed: usize,
        total: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
