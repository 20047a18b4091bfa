use thiserror::Error;

/// Errors raised by the kernel evaluators, samplers and checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested combination is not implemented (for example a ball heat kernel).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical procedure failed to reach its target accuracy.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed catalog key, domain spec or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn unsupported<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Unsupported(msg.into()))
}
