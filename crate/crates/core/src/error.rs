use thiserror::Error;

use crate::geom::Vec2;

/// A position fell outside the (extended) field domain.
#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("position ({}, {}) is outside the field domain", .0.x, .0.y)]
pub struct OutOfDomain(pub Vec2);

/// Malformed binary or text input.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Invalid parameters or configuration.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("unknown synthetic field kind `{0}`")]
    UnknownKind(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("could not parse `{0}`")]
    Parse(String),
}

impl ConfigError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            name,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    OutOfDomain(#[from] OutOfDomain),
    #[error("checksum mismatch: arrow set was generated from field {expected}, got {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("time {0} is outside the valid range")]
    TimeOutOfRange(f64),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
