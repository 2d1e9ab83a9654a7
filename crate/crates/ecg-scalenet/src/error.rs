//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any module in the crate.
///
/// Each variant carries enough context to point at the offending value
/// without needing a backtrace; CLI output prints these verbatim.
#[derive(Debug)]
pub enum Error {
    /// A tensor axis did not match what an operation required.
    ShapeMismatch {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A configuration value fell outside its allowed range/set.
    InvalidConfig(String),
    /// A runtime input violated an operation precondition.
    InvalidInput(String),
    /// A numeric value became NaN/Inf where finiteness is required.
    NonFinite { context: String },
    /// Batch statistics cannot be formed (fewer than two values per channel).
    DegenerateVariance { channel: usize, count: usize },
    /// A metric has no defined value for the given inputs.
    UndefinedMetric(String),
    /// A trial reported twice at the same rung.
    DuplicateReport { trial: usize, rung_epoch: usize },
    /// Manifest/dataset consistency violation.
    Validation(String),
    /// File or serialization format violation.
    Parse(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, axis, expected, actual } => write!(
                f,
                "{op}: axis `{axis}` mismatch (expected {expected}, got {actual})"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::DegenerateVariance { channel, count } => write!(
                f,
                "degenerate variance on channel {channel}: {count} value(s) per channel \
                 (training mode needs at least 2)"
            ),
            Error::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            Error::DuplicateReport { trial, rung_epoch } => {
                write!(f, "trial {trial} already reported at rung epoch {rung_epoch}")
            }
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
