//! Error type shared by every solver layer.

use thiserror::Error;

use crate::hilbert::GridFunction;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two grid functions (or a function and an operator) live on different grids.
    #[error("dimension mismatch: expected {expected} grid points, found {found}")]
    Dimension { expected: usize, found: usize },

    /// An input parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Damped Newton on the regularized equation did not reach the tolerance.
    #[error(
        "regularized solve failed at a = {a:e}: residual {residual:e} after {iterations} Newton iterations"
    )]
    SolverFailure {
        a: f64,
        iterations: usize,
        residual: f64,
        last: Box<GridFunction>,
    },

    /// The bracket handed to the discrepancy bisection does not straddle the target.
    #[error("bracket [{a_lo:e}, {a_hi:e}] does not straddle target {target:e} (phi_lo = {phi_lo:e}, phi_hi = {phi_hi:e})")]
    Bracket {
        a_lo: f64,
        a_hi: f64,
        phi_lo: f64,
        phi_hi: f64,
        target: f64,
    },

    /// The data already satisfy the discrepancy level at u = 0.
    #[error("no discrepancy crossing: ||F(0) - f_delta|| = {initial:e} <= C*delta = {target:e}")]
    NoCrossing { initial: f64, target: f64 },

    /// An iteration produced a non-finite state or a singular linear system.
    #[error("divergence at step {step}: {reason}")]
    Divergence {
        step: usize,
        reason: String,
        residual_history: Vec<f64>,
    },

    /// A documented precondition of an oracle does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A result that should hold by construction failed to re-validate.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    /// Malformed experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
