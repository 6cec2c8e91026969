use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("annotation: {0}")]
    Annotation(String),

    #[error("instance {index}: {reason}")]
    Instance { index: usize, reason: String },

    #[error("duplicate instance id {id} (instance index {index})")]
    DuplicateId { id: u32, index: usize },

    #[error("run lengths sum to {actual}, expected {expected}")]
    RleLength { expected: u64, actual: u64 },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("empty mask")]
    EmptyMask,

    #[error("invalid target size {0}x{1}")]
    ZeroDimension(usize, usize),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("instance {id}: {source}")]
    InInstance {
        id: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("could only place {placed} of {requested} cells")]
    Placement { placed: usize, requested: usize },

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl Error {
    pub(crate) fn mismatch(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        }
    }
}
