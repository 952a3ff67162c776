//! Error type shared by the whole crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix shapes for an operation.
    #[error("{op}: dimension mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// A shape constraint on a single operand was violated.
    #[error("{op}: invalid shape {rows}x{cols}: {reason}")]
    BadShape {
        op: &'static str,
        rows: usize,
        cols: usize,
        reason: String,
    },

    /// An argument was out of its allowed range.
    #[error("invalid argument {name}: {reason}")]
    InvalidArg { name: &'static str, reason: String },

    /// A cell of an input table failed to parse.
    #[error("parse error at row {row}, column {col}: {reason}")]
    Parse { row: usize, col: usize, reason: String },

    /// Malformed binary matrix / checkpoint payload.
    #[error("bad file format: {0}")]
    Format(String),

    /// A loss or objective became non-finite during training.
    #[error("non-finite value at iteration {iteration} in component {component}; components so far: {diagnostics}")]
    NonFinite {
        iteration: usize,
        component: &'static str,
        diagnostics: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArg {
            name,
            reason: reason.into(),
        }
    }
}
