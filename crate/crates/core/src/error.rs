use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("kernel file has bad magic {found:?}, expected \"ENTKFMT1\"")]
    BadMagic { found: [u8; 8] },

    #[error("kernel file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("kernel file truncated: header declares {expected} bytes of payload, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("kernel file contains a non-finite entry at flat offset {offset}")]
    NonFinite { offset: usize },

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("kernel block is singular even with jitter {jitter:e} (condition estimate {condition:e})")]
    SingularKernel { condition: f64, jitter: f64 },

    #[error("exact enumeration refused: n = {n} exceeds the cap of {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("missing features: {0}")]
    MissingFeatures(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularKernel { .. })
    }
}
