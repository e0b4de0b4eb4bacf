use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt stream: {0}")]
    Corruption(String),

    #[error("frame {frame_id} rejected: {reason}")]
    RejectedFrame { frame_id: u64, reason: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by bad parameters rather than bad data or I/O.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
