use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    Shape {
        node: usize,
        op: &'static str,
        detail: String,
    },

    #[error("loss node {node} is not scalar (shape {shape:?})")]
    NonScalarLoss { node: usize, shape: Vec<usize> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unbound graph input `{0}`")]
    UnboundInput(String),

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    OutOfVocab { id: usize, vocab: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weight vector length {weights} does not match target length {target}")]
    LengthMismatch { weights: usize, target: usize },

    #[error("weight {value} at position {position} is outside [0, 1]")]
    WeightOutOfRange { position: usize, value: f64 },

    #[error("line count mismatch: source has {source_lines} lines, target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("sentence {index} has {tokens} tokens, over the batch budget of {budget}")]
    OverBudget {
        index: usize,
        tokens: usize,
        budget: usize,
    },

    #[error("target never reached: best fraction of target was {closest:.4}")]
    TargetNotReached { closest: f64 },

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
