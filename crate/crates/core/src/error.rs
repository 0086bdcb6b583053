use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum MugrepError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),

    #[error("malformed row in {file} at line {line}: {message}")]
    MalformedRow { file: String, line: u64, message: String },

    #[error("unresolved community {community_id} referenced by {context}")]
    UnresolvedCommunity { community_id: u32, context: String },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("invalid value {value:?} for attribute {field}")]
    InvalidAttribute { field: String, value: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("softmax over an empty list")]
    EmptySoftmax,

    #[error("loss must be a scalar, got {0} elements")]
    NonScalarLoss(usize),

    #[error("tape already consumed by a previous backward pass")]
    StaleTape,

    #[error("duplicate or out-of-order event id {0}")]
    DuplicateEvent(u32),

    #[error("unknown event {0}")]
    UnknownEvent(u32),

    #[error("unknown community {0}")]
    UnknownCommunity(u32),

    #[error("unknown district {0}")]
    UnknownDistrict(u32),

    #[error("need at least two communities, got {0}")]
    TooFewCommunities(usize),

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("feature layout mismatch: checkpoint {expected}, dataset {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("empty query")]
    EmptyQuery,

    #[error("non-finite estimate {0}")]
    NonFiniteEstimate(f64),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MugrepError> = std::result::Result<T, E>;

impl MugrepError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MugrepError::Io {
            path: path.into(),
            source,
        }
    }
}
