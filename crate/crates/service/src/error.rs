use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use foodwise_core::{AggregateError, StoreError, ValidationError};
use thiserror::Error;

use crate::api::ErrorBody;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or invalid session token")]
    Unauthorized,
    #[error("admin privileges required")]
    Forbidden,
    #[error("invalid email or password")]
    InvalidCredentials,
    #[error("email already registered")]
    EmailTaken,
    #[error("password must be at least {0} characters")]
    WeakPassword(usize),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    BadScores(#[from] ValidationError),
    #[error("photo exceeds the {limit} byte limit; compress it and try again")]
    PhotoTooLarge { limit: usize },
    #[error("unsupported media type {0:?}; upload a JPEG, PNG, WebP or HEIC photo")]
    UnsupportedMediaType(String),
    #[error("invalid date {0:?}")]
    BadDate(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    NotComputed(String),
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized | ApiError::InvalidCredentials => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::EmailTaken => StatusCode::CONFLICT,
            ApiError::WeakPassword(_) | ApiError::BadRequest(_) | ApiError::BadScores(_) | ApiError::BadDate(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::PhotoTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::UnsupportedMediaType(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::NotFound(_) | ApiError::NotComputed(_) => StatusCode::NOT_FOUND,
            ApiError::StorageUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "Unauthorized",
            ApiError::Forbidden => "Forbidden",
            ApiError::InvalidCredentials => "InvalidCredentials",
            ApiError::EmailTaken => "EmailTaken",
            ApiError::WeakPassword(_) => "WeakPassword",
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::BadScores(_) => "BadScores",
            ApiError::PhotoTooLarge { .. } => "PhotoTooLarge",
            ApiError::UnsupportedMediaType(_) => "UnsupportedMediaType",
            ApiError::BadDate(_) => "BadDate",
            ApiError::NotFound(_) => "NotFound",
            ApiError::NotComputed(_) => "NotComputed",
            ApiError::StorageUnavailable(_) => "StorageUnavailable",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody { error: self.code().to_string(), message: self.to_string() };
        (status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(what) => ApiError::NotFound(what),
            StoreError::BlobTooLarge { limit, .. } => ApiError::PhotoTooLarge { limit },
            StoreError::InvalidRange { from, to } => ApiError::BadRequest(format!("invalid range: {from} is after {to}")),
            other => ApiError::StorageUnavailable(other.to_string()),
        }
    }
}

impl From<AggregateError> for ApiError {
    fn from(err: AggregateError) -> Self {
        ApiError::StorageUnavailable(err.to_string())
    }
}
