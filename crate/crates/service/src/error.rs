use serde::Serialize;
use thiserror::Error;

/// Failures surfaced to clients. Each maps to a stable `code` string and an
/// HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no part masks supplied")]
    NoMasks,
    #[error("{0}")]
    InvalidRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("view {0} does not exist (expected 0..6)")]
    InvalidView(usize),
    #[error("target {target} cannot be annotated: cursor is at {cursor} of {total}")]
    StaleSession { target: usize, cursor: usize, total: usize },
    #[error("({x}, {y}) is not on the part surface in this view")]
    NoSurface { x: f64, y: f64 },
    #[error("no complete session matches the export filter")]
    NothingToExport,
    #[error("journal: {0}")]
    Journal(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NoMasks => "NoMasks",
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::InvalidView(_) => "InvalidView",
            ServiceError::StaleSession { .. } => "StaleSession",
            ServiceError::NoSurface { .. } => "NoSurface",
            ServiceError::NothingToExport => "NothingToExport",
            ServiceError::Journal(_) => "JournalError",
            ServiceError::Internal(_) => "Internal",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NoMasks | ServiceError::InvalidRequest(_) => 400,
            ServiceError::NotFound(_) | ServiceError::InvalidView(_) | ServiceError::NothingToExport => 404,
            ServiceError::StaleSession { .. } => 409,
            ServiceError::NoSurface { .. } => 422,
            ServiceError::Journal(_) | ServiceError::Internal(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        }
    }
}

/// JSON error payload: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
