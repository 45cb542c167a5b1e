use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input: {0}")]
    NonFinite(f64),

    #[error("degenerate embedding: variance {variance:e} is at or below the floor")]
    DegenerateEmbedding { variance: f64 },

    #[error("singular Doppler denominator: medium speed {medium} minus source velocity {source_velocity} is not positive")]
    SingularDenominator { medium: f64, source_velocity: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("stale activation trace: {0}")]
    StaleTrace(String),

    #[error("model file {path}: {message}")]
    Persistence { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// the environment or a numerical failure at run time.
    pub fn is_validation(&self) -> bool {
        if let Error::Sample { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Domain(_)
                | Error::NonFinite(_)
                | Error::Shape { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Config(_)
        )
    }
}
