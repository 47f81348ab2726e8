//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("year {year} outside supported range [{min}, {max}]")]
    YearOutOfRange { year: i32, min: i32, max: i32 },

    #[error("duplicate id {id:?}")]
    DuplicateId { id: String },

    #[error("record {id:?}: field {field} = {value} outside [{min}, {max}]")]
    FieldOutOfRange {
        id: String,
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{path}: bad magic (expected {expected:?})")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: truncated file ({detail})")]
    TruncatedFile { path: PathBuf, detail: String },

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },

    #[error("zero vector where a nonzero vector is required ({context})")]
    ZeroVector { context: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("non-finite gradient in tensor {tensor} at flat index {index}")]
    NonFiniteGradient { tensor: String, index: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch} ({detail})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("empty input: {context}")]
    Empty { context: String },

    #[error("unknown id {id:?} ({context})")]
    UnknownId { id: String, context: String },

    #[error("invalid style taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("invalid reason bank: {0}")]
    InvalidBank(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Numeric failures get a distinct process exit code; everything else is
    /// treated as input validation.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NonFiniteValue { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
