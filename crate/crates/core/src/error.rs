use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown column `{0}` not declared in schema")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: time index is not strictly increasing")]
    NonMonotoneTime { row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyData,

    #[error("too few rows: need at least {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("{learner} failed: {source}")]
    Learner {
        learner: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParam { .. } | Error::Schema(_) | Error::Unsupported(_) => {
                ErrorClass::Config
            }
            Error::Singular(_) | Error::Numeric(_) | Error::Undefined(_) => ErrorClass::Numeric,
            Error::Learner { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
