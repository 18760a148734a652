use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    Size { op: &'static str, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("record {id}: {msg}")]
    Record { id: String, msg: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("checkpoint {path}: blob hash mismatch (expected {expected}, found {found})")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("checkpoint {path}: unsupported format version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("non-finite loss at fold {fold}, epoch {epoch}, batch {batch} (records: {ids})")]
    NonFinite {
        fold: usize,
        epoch: usize,
        batch: usize,
        ids: String,
    },

    #[error("function under gradient check is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("unknown trait `{0}` (expected one of H, E, A, C)")]
    UnknownTrait(String),

    #[error("unknown ablation mode `{0}`")]
    UnknownMode(String),

    #[error("missing trait {0} in aggregate")]
    MissingTrait(char),

    #[error("prompt bank: {0}")]
    PromptBank(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// True when the error stems from bad input (files, configs, flags)
    /// rather than an internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::NonDeterministic { .. } | Error::Shape { .. }
        )
    }
}
