use thiserror::Error;

use crate::model::Trajectory;
use crate::sysdsl::DslError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} (axis {axis})")]
    NonFinite { what: String, axis: usize },

    #[error("integration diverged after t = {t_last}")]
    IntegrationDiverged {
        t_last: f64,
        /// Everything integrated up to the last finite state.
        partial: Box<Trajectory>,
    },

    #[error("{what} is numerically singular (estimate {estimate:e})")]
    Singular { what: String, estimate: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not Hurwitz: {0}")]
    NotHurwitz(String),

    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eig:e})")]
    MetricNotPositive { point: Vec<f64>, min_eig: f64 },

    #[error("no slow-manifold root at x = {x:?}: {reason}")]
    NoRoot { x: Vec<f64>, reason: String },

    #[error("bound not applicable: {0}")]
    BoundInapplicable(String),

    #[error("step too large: dt = {dt} exceeds {max_dt} (mu/50)")]
    StepTooLarge { dt: f64, max_dt: f64 },

    #[error(transparent)]
    Dsl(#[from] DslError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
