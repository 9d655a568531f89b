use malab_core::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration or command line; exit code 2.
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
