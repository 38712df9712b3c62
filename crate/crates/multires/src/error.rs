//! Crate-wide error type and result alias.
//!
//! Errors are split by who is at fault: `Config` means the caller
//! supplied invalid parameters, `Domain` means the request is
//! mathematically undefined on otherwise valid inputs (for example a
//! moment that does not exist), `Internal` means a library invariant
//! was violated, and `Io` wraps filesystem failures. The command-line
//! front end maps these variants onto distinct exit codes.

/// Library error. Messages name the offending field or quantity.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid user-supplied configuration or parameter.
    #[error("config error: {0}")]
    Config(String),
    /// Mathematically undefined request (nonexistent expectation,
    /// degenerate fit, argmin over an empty range, and so on).
    #[error("domain error: {0}")]
    Domain(String),
    /// Violated internal invariant; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
    /// Filesystem or stream failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Internal(format!("csv: {other:?}")),
            }
        } else {
            Error::Config(format!("csv: {e}"))
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
        } else {
            Error::Config(format!("json: {e}"))
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
