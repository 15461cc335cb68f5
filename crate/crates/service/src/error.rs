use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use oodlens_core::saliency::SaliencyError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("no analysis is loaded; run `analyze` first")]
    NotAnalyzed,
    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("unknown instance {0}")]
    UnknownInstance(u64),
    #[error("unknown cluster {cluster}; there are {n_opt}")]
    UnknownCluster { cluster: usize, n_opt: usize },
    #[error("no route for {0}")]
    NoRoute(String),
    #[error("saliency failed: {0}")]
    Saliency(String),
}

impl ViewError {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Self::InvalidParameter { name, message: message.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::NotAnalyzed => "not_analyzed",
            Self::InvalidParameter { .. } => "invalid_parameter",
            Self::UnknownInstance(_) | Self::UnknownCluster { .. } | Self::NoRoute(_) => "not_found",
            Self::Saliency(_) => "saliency_failed",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::NotAnalyzed => StatusCode::SERVICE_UNAVAILABLE,
            Self::InvalidParameter { .. } => StatusCode::BAD_REQUEST,
            Self::UnknownInstance(_) | Self::UnknownCluster { .. } | Self::NoRoute(_) => StatusCode::NOT_FOUND,
            Self::Saliency(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<SaliencyError> for ViewError {
    fn from(e: SaliencyError) -> Self {
        match e {
            SaliencyError::UnknownInstance(id) => Self::UnknownInstance(id),
            other => Self::Saliency(other.to_string()),
        }
    }
}

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ViewError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code().into(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}
