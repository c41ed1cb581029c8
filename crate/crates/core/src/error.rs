use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("incompatible points: {0}")]
    IncompatiblePoints(String),
    #[error("parameter out of range: {name} = {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("negative time: {0}")]
    NegativeTime(f64),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("times must be nonnegative and strictly increasing")]
    UnsortedTimes,
    #[error("trajectory too short: {len} samples, need at least 2")]
    TrajectoryTooShort { len: usize },
    #[error("flow integration failed after {steps} steps at t = {time}")]
    FlowFailed { steps: usize, time: f64 },
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    QuadratureFailed { achieved: f64, requested: f64 },
    #[error("not in class T: partial {index} = {value}")]
    NotInClassT { index: usize, value: f64 },
    #[error("requires class T_b: base function is unbounded")]
    RequiresBounded,
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),
    #[error("wrong side: {0}")]
    WrongSide(&'static str),
    #[error("time step too large: dt = {dt} must be below lambda = {lambda}")]
    TimeStepTooLarge { dt: f64, lambda: f64 },
    #[error("value iteration did not converge after {iterations} iterations, residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("value iteration lost contraction at iteration {iteration}: {increment:e} > {bound:e}")]
    ContractionLost { iteration: usize, increment: f64, bound: f64 },
    #[error("grid mismatch")]
    GridMismatch,
    #[error("unsupported space: {0}")]
    UnsupportedSpace(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::ParameterOutOfRange { name, value })
    }
}
