//! Error taxonomy shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape mismatch or impossible dimensions (zero-sized axis, band count
    /// too small for a spectral stencil, mismatched cube pair).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Out-of-range or inconsistent parameter value.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Malformed HSC stream; `offset` is the byte position of the first
    /// inconsistency.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// Malformed tabular/JSON payload (bad CSV cell, unknown metric name,
    /// inconsistent model file).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn invalid_param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
