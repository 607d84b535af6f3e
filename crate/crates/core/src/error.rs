use thiserror::Error;

/// Errors raised by the solver, analysis and model routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition on dimensions or parameter ranges was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Evaluation outside the horizon of a trajectory.
    #[error("time {t} outside [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },
    /// A propagated state stopped being finite.
    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },
    /// Newton iteration did not reach the residual tolerance.
    #[error("root finding failed after {iterations} iterations (residual {residual:e})")]
    RootFind { iterations: usize, residual: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Hyperbolic functions would overflow double precision.
    #[error("horizon {t} exceeds the overflow threshold {limit}")]
    Overflow { t: f64, limit: f64 },
    /// A problem callback returned a non-finite value.
    #[error("callback produced non-finite output: {0}")]
    Callback(String),
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
