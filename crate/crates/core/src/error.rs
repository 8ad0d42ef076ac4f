//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root solve, quadrature or factorization did not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A combined complex exponent exceeded the representable range.
    #[error("exponent overflow: real part {exponent:.3} exceeds {limit}")]
    Overflow { exponent: f64, limit: f64 },

    /// A structural property that must hold (reality, positivity, symmetry) failed.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// The discretization does not resolve the kernels to the requested tolerance.
    #[error("grid inadequate: {0}")]
    Grid(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}

pub(crate) fn invariant(msg: impl Into<String>) -> Error {
    Error::Invariant(msg.into())
}
