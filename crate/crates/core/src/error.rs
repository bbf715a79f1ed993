use thiserror::Error;

use crate::domain::FoodCategory;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("missing score for {0}")]
    MissingCategory(FoodCategory),
    #[error("score for {category} must be within 0..=100, got {value}")]
    OutOfRange { category: FoodCategory, value: i64 },
    #[error("unknown food category {0:?}")]
    UnknownCategory(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("malformed tray document: {0}")]
    MalformedDocument(String),
    #[error("missing field {0}")]
    MissingField(String),
    #[error("negative pixel area for {0}")]
    NegativeArea(FoodCategory),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimatorError {
    #[error("at least 2 samples are required, got {0}")]
    InsufficientSamples(usize),
    #[error("all samples share the same pixel area")]
    DegenerateX,
    #[error("invalid calibration sample: {0}")]
    InvalidSample(String),
    #[error("failed to read calibration csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("all values are zero")]
    AllZero,
    #[error("daily aggregates span more than one month")]
    MixedMonths,
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    AlreadyExists(String),
    #[error("blob of {size} bytes exceeds the {limit} byte limit")]
    BlobTooLarge { size: usize, limit: usize },
    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: chrono::NaiveDate, to: chrono::NaiveDate },
    #[error("storage unavailable: {0}")]
    Unavailable(String),
    #[error("corrupt document {key}: {source}")]
    Corrupt {
        key: String,
        #[source]
        source: serde_json::Error,
    },
}

impl From<std::io::Error> for StoreError {
    fn from(err: std::io::Error) -> Self {
        StoreError::Unavailable(err.to_string())
    }
}

impl From<StoreError> for AggregateError {
    fn from(err: StoreError) -> Self {
        AggregateError::StorageUnavailable(err.to_string())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}
