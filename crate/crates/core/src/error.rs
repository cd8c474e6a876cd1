use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("{what} = {value} is outside the valid domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("invalid field parameters: {0}")]
    InvalidSpec(String),

    /// Newton iteration for quadrature nodes failed to settle.
    #[error("Gauss-Legendre node {index} of {order} did not converge after {iterations} iterations")]
    NoConvergence {
        order: usize,
        index: usize,
        iterations: usize,
    },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("grid resolves degree {available} but degree {required} is required")]
    UnderResolved { required: usize, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// All samples are identical, so a standardised statistic is undefined.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Error {
    Error::Domain {
        what,
        value,
        domain: domain.into(),
    }
}
