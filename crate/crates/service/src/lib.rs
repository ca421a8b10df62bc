//! HTTP service for the two-stage annotation flow: sampled image points are
//! handed out one at a time, the annotator clicks the matching spot on one of
//! six rendered views of the part, and the click is resolved to a surface
//! point and echoed onto every view.
//!
//! Sessions persist as append-only NDJSON journals and are rebuilt by replay
//! when the service starts.

pub mod error;
pub mod http;
pub mod service;
pub mod session;

pub use error::{ErrorBody, ServiceError};
pub use http::{router, serve};
pub use service::{
    AnnotationService, ClickRequest, ClickResponse, ExportFilter, NextTask, ServiceConfig, SessionSummary,
};
pub use session::{CorrespondencePoint, CreateSessionRequest, MaskInput, SessionStatus, Target};
