use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hgml_core::api::{ErrorBody, FieldError};
use thiserror::Error;

/// Failures while building the service from its configuration.
#[derive(Debug, Error)]
pub enum SetupError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] hgml_core::Error),

    #[error("listen: {0}")]
    Io(#[from] std::io::Error),
}

/// Request failures, each mapped to a status code and a JSON `ErrorBody`.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown or expired session")]
    UnknownSession,

    #[error("session already submitted")]
    AlreadySubmitted,

    #[error("no annotation tasks left")]
    PoolExhausted,

    #[error("{}", .0.error)]
    Invalid(FieldError),

    #[error("internal error: {0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::UnknownSession => StatusCode::NOT_FOUND,
            ApiError::AlreadySubmitted => StatusCode::CONFLICT,
            ApiError::PoolExhausted => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if let ApiError::Internal(msg) = &self {
            tracing::error!("{msg}");
        }
        let field = match &self {
            ApiError::Invalid(e) => Some(e.field.clone()),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            field,
        };
        (status, Json(body)).into_response()
    }
}
