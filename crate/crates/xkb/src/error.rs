use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use xkb_core::{Error as CoreError, ParseError};

/// Errors surfaced by the session service, each mapped to one HTTP status.
#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    /// Malformed request, rule text, table or KB (400).
    #[error("{message}")]
    BadRequest { message: String, parse: Option<ParseError> },
    #[error("{0}")]
    NotFound(String),
    /// Proposal already committed or computed against an older state (409).
    #[error("{0}")]
    Conflict(String),
    /// Well-formed input that violates a logical precondition (422).
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::BadRequest { message: message.into(), parse: None }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest { .. } => "bad_request",
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse(p) => ApiError::BadRequest { message: format!("parse error at {p}"), parse: Some(p) },
            CoreError::InvalidSchema(_)
            | CoreError::UnknownFeature(_)
            | CoreError::UnknownValue { .. }
            | CoreError::UnknownClass(_)
            | CoreError::DuplicateRuleId(_)
            | CoreError::NotInstanceRule { .. }
            | CoreError::SchemaMismatch(_)
            | CoreError::Table(_) => ApiError::bad_request(e.to_string()),
            CoreError::GridTooLarge { .. }
            | CoreError::CapExceeded { .. }
            | CoreError::InputSelfInconsistent(_)
            | CoreError::InvalidConfig(_)
            | CoreError::KdUpdateForbidden(_)
            | CoreError::OracleLimit(_) => ApiError::Unprocessable(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse: Option<&'a ParseError>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let parse = match &self {
            ApiError::BadRequest { parse, .. } => parse.as_ref(),
            _ => None,
        };
        let body = ErrorBody { error: self.kind(), message: self.to_string(), parse };
        (self.status(), Json(body)).into_response()
    }
}
