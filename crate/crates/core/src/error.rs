use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("channel {channel} has zero variance and epsilon is 0")]
    DegenerateChannel { channel: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("patch set is empty")]
    EmptyPatchSet,

    #[error("bad magic {found:?}, expected \"TSSF\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("reserved flags must be zero, found {0:#06x}")]
    ReservedFlags(u16),

    #[error("truncated {section}: expected {expected} bytes, found {actual}")]
    Truncated {
        section: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("missing layer {0}")]
    MissingLayer(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True for operating-system level failures (as opposed to bad input).
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
