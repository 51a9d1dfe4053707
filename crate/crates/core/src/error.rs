use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} lies outside the closed domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("operator order 2m = {order} must exceed the dimension {dim}")]
    OrderTooLow { order: usize, dim: usize },

    #[error("{n} nodes per axis cannot hold the {width}-point stencil (need n >= 2m+1)")]
    StencilTooWide { n: usize, width: usize },

    #[error("coefficient sample {value} at {point:?} is not strictly positive and finite")]
    NonPositiveCoefficient { value: f64, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operators are defined on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} failed to converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error(
        "spectral truncation at t = {t} leaves a remainder bound {remainder:e} above the \
         {tolerance:e} relative guarantee (value {value:e}); request more modes"
    )]
    Truncation {
        t: f64,
        remainder: f64,
        value: f64,
        tolerance: f64,
    },

    #[error("constant `{0}` has not been calibrated")]
    Uncalibrated(&'static str),

    #[error("template vanishes at sample {index} where the target value is {value}: infinite constant")]
    InfiniteConstant { index: usize, value: f64 },

    #[error("regime mismatch: requested {requested}, arguments classify as {actual}")]
    RegimeMismatch {
        requested: &'static str,
        actual: &'static str,
    },

    #[error("test function radius {r} exceeds the boundary distance {d}: not in the form domain")]
    NotAdmissible { r: f64, d: f64 },

    #[error("kernel ratio delta = {delta} exceeds 1 at t = {t}: upper-bound calibration violated")]
    CalibrationViolated { t: f64, delta: f64 },

    #[error("internal numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
