use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite signal at step {step}: {what}")]
    SignalCorruption { step: usize, what: &'static str },

    #[error("divergence at step {step}: {what}")]
    Divergence { step: usize, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible stability constant: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for errors the CLI reports with the divergence exit code.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::SignalCorruption { .. }
        )
    }
}
