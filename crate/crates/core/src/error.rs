use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation at s = {s} is outside the profile domain ({reason})")]
    OutOfDomain { s: f64, reason: &'static str },

    #[error("value {value} is outside the range of the profile derivative [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("degenerate convexity: second derivative {value} at s = {s}")]
    DegenerateConvexity { s: f64, value: f64 },

    #[error("incompatible profiles: diagonal jet mismatch {mismatch:?} exceeds {tol}")]
    Incompatible { mismatch: [f64; 3], tol: f64 },

    #[error("non-convex Fourier approximation: min f + f'' = {min_value} at theta = {theta}")]
    NonConvexApproximation { min_value: f64, theta: f64 },

    #[error("nonpositive discriminant {0} in the linearization at (1, 1)")]
    Discriminant(f64),

    #[error("fixed-point iteration did not contract after {iterations} iterations (last step {last_step:e}); try a smaller t0")]
    NoContraction { iterations: usize, last_step: f64 },

    #[error("integrator failure at {at}: {reason}")]
    Integrator { at: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
