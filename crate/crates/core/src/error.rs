use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("out of range: {0}")]
    Range(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("tensor is already in dB scale")]
    AlreadyLogScale,

    #[error("negative magnitude {value} at flat index {index}")]
    NegativeMagnitude { index: usize, value: f64 },

    #[error("scale error: {0}")]
    Scale(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
