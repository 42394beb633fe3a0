//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A `HoughSpec` or pipeline configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A line or lane maps outside the range covered by the parameter grid.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Tensor or grid shapes do not agree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// A lane collapsed to a single point and has no supporting line.
    #[error("degenerate lane{}", id.map(|i| format!(" (id {i})")).unwrap_or_default())]
    DegenerateLane { id: Option<u32> },

    /// Annotation input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A loss term evaluated to a non-finite value.
    #[error("non-finite loss term `{term}` ({value})")]
    NonFinite { term: &'static str, value: f64 },

    /// Malformed binary container (HMAP grid or HLWT checkpoint).
    #[error("bad container: {0}")]
    BadContainer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
