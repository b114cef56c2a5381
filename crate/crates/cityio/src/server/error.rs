use std::sync::Arc;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use cityio_core::{Commit, FeedbackError};

use crate::store::StoreError;
use crate::wire::ErrorBody;

use super::routes::json;

/// An error response: `{"error": code, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub head: Option<Arc<Commit>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), head: None }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn conflict(head: Arc<Commit>) -> Self {
        let message = format!("head is at version {}", head.version);
        ApiError { head: Some(head), ..Self::new(StatusCode::CONFLICT, "conflict", message) }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            StoreError::UnknownTable(_) => (S::NOT_FOUND, "unknown_table"),
            StoreError::TableExists(_) => (S::CONFLICT, "table_exists"),
            StoreError::InvalidSpec(_) => (S::BAD_REQUEST, "invalid_spec"),
            StoreError::UnknownVersion { .. } => (S::NOT_FOUND, "unknown_version"),
            StoreError::InvalidRange { .. } => (S::BAD_REQUEST, "invalid_range"),
            StoreError::RangeTooLarge(_) => (S::BAD_REQUEST, "range_too_large"),
            StoreError::InvalidGrid(_) => (S::BAD_REQUEST, "invalid_grid"),
            StoreError::EditsNeedBase => (S::BAD_REQUEST, "missing_base_version"),
            StoreError::AuthorTooLong => (S::BAD_REQUEST, "invalid_author"),
            StoreError::Feedback(f) => match f {
                FeedbackError::UnknownComment(_) => (S::NOT_FOUND, "unknown_comment"),
                FeedbackError::EmptyText => (S::BAD_REQUEST, "empty_text"),
                FeedbackError::TextTooLong(_) => (S::BAD_REQUEST, "text_too_long"),
                FeedbackError::InvalidAnchor => (S::BAD_REQUEST, "invalid_anchor"),
                FeedbackError::InvalidAuthor => (S::BAD_REQUEST, "invalid_author"),
                FeedbackError::OutOfSequence { .. } => (S::INTERNAL_SERVER_ERROR, "internal"),
            },
            StoreError::InvalidLayer(_) => (S::BAD_REQUEST, "invalid_layer"),
            StoreError::LayerVersion { .. } => (S::BAD_REQUEST, "invalid_layer_version"),
            StoreError::StaleLayer { .. } => (S::CONFLICT, "stale_layer"),
            StoreError::SinceAhead { .. } => (S::BAD_REQUEST, "since_ahead"),
            StoreError::ReadOnly(_) => (S::SERVICE_UNAVAILABLE, "read_only"),
            StoreError::ChainBroken { .. } | StoreError::Corrupt { .. } => (S::INTERNAL_SERVER_ERROR, "integrity"),
            StoreError::Io { .. } => (S::INTERNAL_SERVER_ERROR, "storage_failure"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.into(),
            message: self.message,
            head: self.head.map(|h| (*h).clone()),
        };
        json(self.status, &body)
    }
}
