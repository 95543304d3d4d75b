use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller supplied arguments that violate a precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("ingestion error in {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("ingestion error at row {row}, column \"{column}\": {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("encoding error: unseen category \"{value}\" in column \"{column}\"")]
    UnseenCategory { column: String, value: String },

    #[error("training diverged at epoch {epoch}: batch loss is not finite")]
    Diverged { epoch: usize },

    #[error("model {model} failed on fold {fold} of replicate {replicate}: {source}")]
    Experiment {
        model: String,
        fold: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_)
                | Error::Domain(_)
                | Error::Ingest { .. }
                | Error::BadCell { .. }
                | Error::UnseenCategory { .. }
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}
