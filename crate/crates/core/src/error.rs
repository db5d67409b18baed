//! Error type shared by all core modules.

use core::fmt;

/// Errors reported by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two rasters that must share dimensions do not.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// An argument violated a documented precondition.
    InvalidArgument(&'static str),
    /// A gradient evaluation produced a non-finite value.
    NanGradient { iteration: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NanGradient { iteration } => {
                write!(f, "non-finite gradient at iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
