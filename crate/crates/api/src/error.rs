use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vocab_core::Error;

/// The JSON error body every route returns on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            http_status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn unauthenticated(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthenticated", message)
    }

    pub fn invalid_assertion(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "InvalidAssertion", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidArgument", message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

/// The HTTP status for each domain error. Kept as one exhaustive match so a
/// new variant cannot ship unmapped.
pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::EmptyLabel
        | Error::EmptyBody
        | Error::EmptyTag
        | Error::InvalidValue(_)
        | Error::NoExample => StatusCode::UNPROCESSABLE_ENTITY,
        Error::InvalidArgument(_) | Error::MalformedPayload(_) => StatusCode::BAD_REQUEST,
        Error::UnknownTerm(_) | Error::UnknownDefinition(_) | Error::UnknownUser(_) => StatusCode::NOT_FOUND,
        Error::NotAuthorized(_) => StatusCode::FORBIDDEN,
        Error::DuplicateLabel { .. }
        | Error::AiDefinitionExists
        | Error::NoAIDefinition
        | Error::NoPendingFeedback
        | Error::GenerationInProgress
        | Error::ConflictRetry
        | Error::ClockSkew { .. } => StatusCode::CONFLICT,
        Error::BackendUnavailable { .. } | Error::StorageUnavailable(_) | Error::SchemaMismatch { .. } => {
            StatusCode::SERVICE_UNAVAILABLE
        }
        Error::CorruptHistory { .. } | Error::MigrationFailure { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn details_for(err: &Error) -> Option<Value> {
    match err {
        Error::DuplicateLabel { label } => Some(json!({ "label": label })),
        Error::UnknownTerm(id) => Some(json!({ "term_id": id })),
        Error::UnknownDefinition(id) => Some(json!({ "definition_id": id })),
        Error::UnknownUser(id) => Some(json!({ "user_id": id })),
        Error::InvalidValue(v) => Some(json!({ "value": v })),
        Error::BackendUnavailable { backend, .. } => Some(json!({ "backend": backend })),
        Error::CorruptHistory { term_id, .. } => Some(json!({ "term_id": term_id })),
        Error::SchemaMismatch { found, expected } => Some(json!({ "found": found, "expected": expected })),
        _ => None,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = status_for(&err);
        if status.is_server_error() {
            tracing::warn!(code = err.code(), "{err}");
        }
        Self {
            http_status: status.as_u16(),
            code: err.code().to_owned(),
            message: err.to_string(),
            details: details_for(&err),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
