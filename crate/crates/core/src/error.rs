use thiserror::Error;

use crate::llm::LlmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error on {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("generation failed: {0}")]
    Generation(#[source] LlmError),

    #[error("model returned an empty {0} generation")]
    EmptyGeneration(&'static str),

    #[error("filter failed: {0}")]
    Filter(#[source] LlmError),

    #[error("invalid state: {0}")]
    State(String),

    #[error("judge reply could not be parsed: {0:?}")]
    JudgeParse(String),

    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl Error {
    pub(crate) fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True when the failure came from the chat transport rather than from
    /// local data or configuration.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            Error::Generation(_) | Error::Filter(_) | Error::Llm(_)
        )
    }
}
