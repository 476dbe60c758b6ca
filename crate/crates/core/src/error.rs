use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("{0}")]
    EmptyClass(String),

    #[error("no target arousal samples")]
    NoPositives,

    #[error("{}: size mismatch: expected {expected} bytes, found {actual}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{}: bad magic {found:?}, expected {expected:?}", path.display())]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{}: truncated at byte {offset}: {what}", path.display())]
    Truncated {
        path: PathBuf,
        offset: u64,
        what: String,
    },

    #[error("{}: malformed at byte {offset}: {what}", path.display())]
    Malformed {
        path: PathBuf,
        offset: u64,
        what: String,
    },

    #[error("{}: label byte {value} at offset {offset} is outside {{-1, 0, 1}}", path.display())]
    LabelDomain {
        path: PathBuf,
        offset: u64,
        value: i8,
    },

    #[error("{}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})", path.display())]
    Checksum {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },

    #[error("model kind mismatch: expected {expected}, file holds {found}")]
    KindMismatch { expected: String, found: String },

    #[error("unknown model kind tag {0}")]
    UnknownKind(u32),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
