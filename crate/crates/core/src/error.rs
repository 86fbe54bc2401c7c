use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain where the requested quantity exists.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied argument is malformed or violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state or operator was used with a basis it does not belong to.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// The Fock cutoff discards more probability than allowed.
    #[error("truncation too small: {0}")]
    Truncation(String),

    /// A numerical self-check failed (leakage, analytic cross-check, ...).
    #[error("numerical contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
