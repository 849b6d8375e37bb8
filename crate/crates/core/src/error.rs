use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DdpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DdpError {
    #[error("line {line}: cannot parse {token:?} as a real number")]
    Parse { line: usize, token: String },

    #[error("line {line}: expected {expected} values per sample, found {found}")]
    SampleWidth { line: usize, expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Directive { line: usize, message: String },

    #[error("line {line}: burst truncated after {have} of {expected} samples")]
    Truncated { line: usize, have: usize, expected: usize },

    #[error("line {line}: non-finite value")]
    NonFinite { line: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("no admissible pair constant in dimension {dimension}; datum cannot be fitted")]
    DatumUnfittable { dimension: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("group {0} has no values")]
    GroupUnavailable(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl DdpError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DdpError::Io {
            path: path.into(),
            source,
        }
    }
}
