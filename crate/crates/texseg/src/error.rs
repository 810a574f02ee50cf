use std::io;
use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    /// Unreadable or unsupported image file contents.
    #[error("format: {0}")]
    Format(String),
    /// Arguments or configuration violate a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Structurally valid input that is degenerate for the requested operation
    /// (e.g. a window with no valid pixel pairs).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A numerical procedure failed (singular system, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code used by the CLI: data problems map to 2,
    /// numerical failures to 3 (usage errors are handled by the parser).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
