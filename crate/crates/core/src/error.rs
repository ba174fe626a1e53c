use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain [{lo}, {hi}] of {what}")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("value {value} outside the range of {what} (max {max})")]
    Range {
        what: &'static str,
        value: f64,
        max: f64,
    },
    #[error("{0} failed to converge")]
    Convergence(&'static str),
    #[error("integral diverges: {0}")]
    Divergence(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary chart undefined: {0}")]
    Chart(String),
    #[error("gradient of the defining function degenerates at the point")]
    DegenerateGradient,
    #[error("point lies outside the admissible region: {0}")]
    Region(String),
    #[error("quadrature budget of {0} panels exhausted before reaching tolerance")]
    Budget(usize),
    #[error("no asymptotic model fits the tabulated modulus (best residual {0:.3e})")]
    Fit(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
