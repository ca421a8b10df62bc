//! HTTP routes. Every JSON error has the shape `{"code", "message"}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use densecorr::mesh::PartId;
use serde::Deserialize;

use crate::error::ServiceError;
use crate::service::{AnnotationService, ClickRequest, ExportFilter};
use crate::session::CreateSessionRequest;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status() >= 500 {
            tracing::error!(error = %self, "request failed");
        }
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type Shared = Arc<AnnotationService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/next-task", get(next_task))
        .route("/sessions/{id}/clicks", post(submit_click))
        .route("/parts/{part}/views/{view}", get(view_png))
        .route("/parts/{part}/views/{view}/meta", get(view_meta))
        .route("/export", get(export))
        .with_state(service)
}

/// Runs blocking geometry work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ServiceError::InvalidRequest(e.body_text()))
}

fn parse_part(raw: &str) -> Result<PartId, ServiceError> {
    raw.parse::<u8>()
        .ok()
        .and_then(|p| PartId::new(p).ok())
        .filter(|p| !p.is_background())
        .ok_or_else(|| ServiceError::NotFound(format!("part {raw}")))
}

fn parse_view(raw: &str) -> Result<usize, ServiceError> {
    raw.parse()
        .map_err(|_| ServiceError::NotFound(format!("view {raw}")))
}

async fn create_session(
    State(svc): State<Shared>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let request = body(payload)?;
    let summary = blocking(move || svc.create_session(&request)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn session_summary(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(svc.session_summary(&id)?))
}

async fn next_task(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(svc.next_task(&id)?))
}

async fn submit_click(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<ClickRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let click = body(payload)?;
    Ok(Json(blocking(move || svc.submit_click(&id, &click)).await?))
}

async fn view_png(
    State(svc): State<Shared>,
    Path((part, view)): Path<(String, String)>,
) -> Result<impl IntoResponse, ServiceError> {
    let (part, view) = (parse_part(&part)?, parse_view(&view)?);
    let png = blocking(move || svc.view_png(part, view)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn view_meta(
    State(svc): State<Shared>,
    Path((part, view)): Path<(String, String)>,
) -> Result<impl IntoResponse, ServiceError> {
    let (part, view) = (parse_part(&part)?, parse_view(&view)?);
    Ok(Json(blocking(move || svc.view_meta(part, view)).await?))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    image_id: Option<u64>,
    /// Comma-separated session ids.
    sessions: Option<String>,
}

async fn export(
    State(svc): State<Shared>,
    query: Result<Query<ExportQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = query.map_err(|e| ServiceError::InvalidRequest(e.body_text()))?;
    let filter = ExportFilter {
        image_id: q.image_id,
        sessions: q
            .sessions
            .map(|s| s.split(',').filter(|t| !t.is_empty()).map(str::to_string).collect()),
    };
    let dataset = svc.export(&filter)?;
    let text = densecorr::io::canonical_json(&dataset).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text))
}

/// Serves until the task is cancelled or the listener fails.
pub async fn serve(service: Shared, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "annotation service listening");
    axum::serve(listener, router(service)).await
}
