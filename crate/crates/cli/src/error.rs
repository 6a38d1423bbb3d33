use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] motorid::Error),

    #[error("no usable input: {0}")]
    NoInput(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration, 3 protocol precondition, 4 input or output.
    pub fn exit_code(&self) -> i32 {
        use motorid::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::NoInput(_) => 4,
            CliError::Core(e) => match e {
                E::Config(_) => 2,
                E::Protocol(_)
                | E::ClassTooSmall { .. }
                | E::MotorTooSmall { .. }
                | E::SingleClass(_) => 3,
                _ => 4,
            },
        }
    }
}
