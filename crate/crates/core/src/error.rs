use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rejected detection: {0}")]
    RejectedDetection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("class {0} has no training rows")]
    AbsentClass(String),

    #[error("{groups} distinct cluster ids cannot fill {folds} folds")]
    NotEnoughGroups { groups: usize, folds: usize },

    #[error("non-finite validation score for candidate feature set {0:?}")]
    NonFiniteScore(Vec<String>),

    #[error("unknown baseline configuration {0:?}")]
    UnknownBaseline(String),

    #[error("version mismatch: {0}")]
    VersionMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed data in {context}: {message}")]
    Data { context: String, message: String },

    #[error("missing input {0}")]
    MissingInput(PathBuf),

    #[error("hash mismatch for {path}: manifest records {expected}, file has {actual}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            context: context.into(),
            message: message.into(),
        }
    }
}
