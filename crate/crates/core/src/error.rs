use thiserror::Error;

use crate::identify::IdentificationResult;

/// Errors produced by the identification library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported spatial dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),

    #[error("{point} lies outside the domain {domain}")]
    DomainViolation { point: String, domain: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("convexity violated: {0}")]
    ConvexityViolation(String),

    #[error("incompressibility constraint violated: stretch product is {product}")]
    Incompressibility { product: f64 },

    #[error("admissible boundary program is empty: [{lo}, {hi}]")]
    InfeasibleProgram { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The solver exhausted its iteration budget. `best` carries the last
    /// feasible iterate when one exists.
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        best: Option<Box<IdentificationResult>>,
    },

    /// A property that must hold by construction was observed to fail.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
