use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;
use xcal_core::model::{ModelError, ValidationReport};
use xcal_core::report::ReportError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown campaign {0:?}")]
    UnknownCampaign(String),
    #[error("unknown evaluator {0:?}")]
    UnknownEvaluator(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("campaign is closed")]
    CampaignClosed,
    #[error("campaign is not open for judgments yet")]
    NotCollecting,
    #[error("campaign definition is invalid: {0}")]
    ValidationFailed(ValidationReport),
    #[error("campaign definition is malformed: {0}")]
    Malformed(#[from] ModelError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
    #[error("storage: {0}")]
    Corrupt(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownCampaign(_) | ServiceError::UnknownEvaluator(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::CampaignClosed | ServiceError::NotCollecting => StatusCode::CONFLICT,
            ServiceError::ValidationFailed(_)
            | ServiceError::Malformed(_)
            | ServiceError::Report(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) | ServiceError::Corrupt(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownCampaign(_) => "unknown_campaign",
            ServiceError::UnknownEvaluator(_) => "unknown_evaluator",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::CampaignClosed => "campaign_closed",
            ServiceError::NotCollecting => "not_collecting",
            ServiceError::ValidationFailed(_) | ServiceError::Malformed(_) => "validation_failed",
            ServiceError::Report(e) if e.is_insufficient_data() => "insufficient_data",
            ServiceError::Report(_) => "report_failed",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Storage(_) | ServiceError::Corrupt(_) => "storage",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let ServiceError::ValidationFailed(report) = &self {
            body["violations"] = serde_json::to_value(&report.violations).unwrap_or_default();
        }
        if self.status().is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (self.status(), Json(body)).into_response()
    }
}
