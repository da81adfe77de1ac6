//! Crate-wide error type and the exit-code mapping used by the CLI.

use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or dimension mismatch between tensors, naming both shapes.
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Invalid configuration value (hyper-parameter out of range, bad flag).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data (corpus files, vocabularies).
    #[error("data error: {0}")]
    Data(String),

    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Artifacts that must match do not (e.g. vocabulary hash mismatch).
    #[error("compatibility error: {0}")]
    Compat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    /// Process exit code for this error: 2 input/data, 3 config, 4 compatibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Io(_) => 2,
            Error::Config(_) => 3,
            Error::Compat(_) => 4,
            Error::Shape { .. } | Error::Contract(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
