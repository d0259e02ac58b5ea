//! Error type shared by the whole crate.

/// Errors produced by solver construction and application.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A vector or matrix dimension does not match what the operation needs.
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    /// A dense fallback was requested above its size guard.
    #[error("size guard exceeded: {0}")]
    TooLarge(String),

    /// A numerical invariant failed at run time (NaN/Inf, breakdown,
    /// excessive imaginary residue in a transform round trip).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

/// Checks that `got == expected`, returning a `SizeMismatch` otherwise.
pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}
