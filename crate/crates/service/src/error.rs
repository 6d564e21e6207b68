use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session `{0}` not found")]
    NotFound(String),

    #[error("{message}")]
    BadRequest {
        code: &'static str,
        message: String,
        detail: Value,
    },

    #[error(transparent)]
    Core(#[from] tac_core::Error),

    #[error("storage failure: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::BadRequest {
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest { code, .. } => match *code {
                "malformed_json" => StatusCode::BAD_REQUEST,
                "route_not_found" => StatusCode::NOT_FOUND,
                "unsupported_media_type" => StatusCode::UNSUPPORTED_MEDIA_TYPE,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::Core(e) => match e {
                tac_core::Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (code, detail) = match self {
            ServiceError::NotFound(id) => ("session_not_found", json!({ "id": id })),
            ServiceError::BadRequest { code, detail, .. } => (*code, detail.clone()),
            ServiceError::Core(e) => core_code(e),
            ServiceError::Storage(_) => ("storage_failure", Value::Null),
        };
        ErrorBody {
            code: code.to_string(),
            message: self.to_string(),
            detail,
        }
    }
}

fn core_code(e: &tac_core::Error) -> (&'static str, Value) {
    use tac_core::Error as E;
    match e {
        E::DimensionMismatch { expected, got } => ("dimension_mismatch", json!({ "expected": expected, "got": got })),
        E::InvalidTrajectory { id, reason } => ("invalid_dataset", json!({ "trajectory": id, "reason": reason })),
        E::InvalidDataset(reason) => ("invalid_dataset", json!({ "reason": reason })),
        E::EmptyDataset => ("invalid_dataset", json!({ "reason": "no records" })),
        E::Parse { line, message } => ("invalid_dataset", json!({ "line": line, "reason": message })),
        E::InvalidParameter { name, reason } => ("invalid_parameter", json!({ "parameter": name, "reason": reason })),
        E::DegenerateDataset {
            human_strict,
            induced_strict,
        } => (
            "degenerate_tac",
            json!({ "human_strict": human_strict, "induced_strict": induced_strict }),
        ),
        E::Stage { stage, source } => ("training_failed", json!({ "stage": stage, "cause": source.to_string() })),
        E::NonFiniteLoss { epoch, detail } => ("training_failed", json!({ "epoch": epoch, "cause": detail })),
        E::Io(reason) => ("storage_failure", json!({ "reason": reason })),
        E::InvalidWorld(reason) | E::NonTerminating(reason) => ("invalid_parameter", json!({ "reason": reason })),
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(rejection: JsonRejection) -> Self {
        let code = match &rejection {
            JsonRejection::JsonSyntaxError(_) => "malformed_json",
            JsonRejection::MissingJsonContentType(_) => "unsupported_media_type",
            _ => "invalid_request",
        };
        ServiceError::BadRequest {
            code,
            message: rejection.body_text(),
            detail: Value::Null,
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(err: std::io::Error) -> Self {
        ServiceError::Storage(err.to_string())
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(err: serde_json::Error) -> Self {
        ServiceError::Storage(err.to_string())
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;
