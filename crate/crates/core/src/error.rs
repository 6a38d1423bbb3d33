use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-uniform sample timing at line {line}")]
    NonUniformTiming { line: usize },

    #[error("no period structure: {0}")]
    NoPeriodStructure(String),

    #[error("steady state too short: {0}")]
    SteadyStateTooShort(String),

    #[error("event truncated: {0}")]
    EventTruncated(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training requires at least two classes, got {0}")]
    SingleClass(usize),

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("class `{class}` has {count} members, fewer than {required}")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("motor `{motor}` has {count} events, fewer than {required}")]
    MotorTooSmall {
        motor: String,
        count: usize,
        required: usize,
    },

    #[error("protocol precondition violated: {0}")]
    Protocol(String),

    #[error("malformed model file: {0}")]
    Model(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
