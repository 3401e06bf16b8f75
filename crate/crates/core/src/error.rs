use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input value outside its admissible domain.
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("insufficient data: need {needed}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// Zero-variance series, a single-symbol discretization and similar.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite state in path {path} at step {step}: {what}")]
    Simulation {
        path: usize,
        step: usize,
        what: &'static str,
    },

    #[error("episode already finished at step {step} (maturity {maturity})")]
    EpisodeFinished { step: usize, maturity: usize },

    #[error("policy weights format: {0}")]
    WeightsFormat(String),

    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
