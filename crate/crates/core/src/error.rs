use std::io;

use crate::ingest::IngestError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument or state fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// A binary or text artifact could not be decoded.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss {loss:.6e} exceeds 10x initial {initial:.6e}")]
    Diverged { epoch: usize, loss: f64, initial: f64 },

    #[error("simulation aborted: {0}")]
    SimAbort(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
