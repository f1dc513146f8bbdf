use thiserror::Error;

/// Errors raised by the analytic and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for the given model or input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The request exceeds a memory or enumeration cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A numerical routine failed (singular matrix, failed factorization, divergence).
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !($cond) {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
