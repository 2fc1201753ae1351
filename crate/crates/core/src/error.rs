use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported sampling rate: {0} Hz")]
    UnsupportedRate(f64),

    #[error("insufficient data: need at least {required}, got {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("unsupported sample size {0} (allowed 3..=5000)")]
    UnsupportedSize(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("already exists: {0}")]
    AlreadyExists(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("incomplete transfer: {0}")]
    IncompleteTransfer(String),

    #[error("transfer aborted by peer: {0}")]
    TransferAborted(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("discovery failure: {0}")]
    DiscoveryFailure(String),

    #[error("variable `{variable}` missing in session {session}")]
    MissingVariable { session: String, variable: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
