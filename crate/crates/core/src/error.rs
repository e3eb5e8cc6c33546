use thiserror::Error;

/// Errors produced by the thermometry library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller violated an operation contract (wrong measurement angle, bad shapes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Quadrature or another numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {message} (estimate {estimate:e}, error {error:e}, {intervals} intervals)")]
    Numerical {
        message: String,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// The quantity is mathematically degenerate at the requested point.
    #[error("degenerate case: {0}")]
    Degenerate(String),

    /// Exact enumeration was asked for more thermometers than the configured cap.
    #[error("exact enumeration refused for N = {n} (cap {cap}); use the sampling module for larger systems")]
    TooLarge { n: usize, cap: usize },

    /// A text input (spectrum table, batch file) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures of numerical procedures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
