use std::path::PathBuf;

/// Errors produced by the library. The CLI wraps these in `anyhow`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ordering error at row {row}: timestamp {timestamp} does not increase on {previous}")]
    Ordering {
        row: usize,
        timestamp: i64,
        previous: i64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("insufficient length: need at least {needed}, got {got}")]
    Length { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("training diverged at step {step}: non-finite loss")]
    StepDivergence { step: usize },

    #[error("R2_OS undefined at horizon {horizon}: benchmark MSE is zero")]
    UndefinedR2 { horizon: usize },

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("artifact `{path}`: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
