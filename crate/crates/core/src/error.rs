//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands whose shapes must agree do not.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An operand has the wrong rank for the operation.
    #[error("{op} expects a rank-{expected} tensor, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },

    /// A caller-side precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data failed validation (alignment, sequence lengths, labels).
    #[error("invalid data: {0}")]
    Validation(String),

    /// A file could not be parsed; `record` is the 1-based line number.
    #[error("parse error at record {record}: {msg}")]
    Parse { record: usize, msg: String },

    /// Checkpoint file is malformed or inconsistent with its config.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A metric is undefined on the given inputs.
    #[error("metric error: {0}")]
    Metric(String),

    /// Non-finite values or a failed numerical check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Wraps a lower-level error with the site it occurred at.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a context label (e.g. which gate or modality failed).
    pub fn in_context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
