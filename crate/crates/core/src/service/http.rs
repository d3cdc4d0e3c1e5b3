use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use super::{AskRequest, IngestRequest, ServiceError, ServiceState};
use crate::config::{AppConfig, ConfigError, ServiceSection};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if let ServiceError::IngestFailed(report) = self {
            return (status, Json(json!({ "report": report, "index_count": null }))).into_response();
        }
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (status, Json(body)).into_response()
    }
}

fn bad_json(e: JsonRejection) -> ServiceError {
    ServiceError::BadRequest(e.body_text())
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn health(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    Json(state.health())
}

async fn ask(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Json(req) = body.map_err(bad_json)?;
    Ok(Json(blocking(move || state.ask(&req)).await?))
}

async fn search(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Json(req) = body.map_err(bad_json)?;
    Ok(Json(blocking(move || state.search(&req)).await?))
}

async fn ingest(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<IngestRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(req) = body.map_err(bad_json)?;
    let resp = blocking(move || state.ingest(&req)).await?;
    let status = if resp.report.errors.is_empty() {
        StatusCode::OK
    } else {
        StatusCode::MULTI_STATUS
    };
    Ok(json_with(status, &resp))
}

fn json_with<T: Serialize>(status: StatusCode, body: &T) -> Response {
    (status, Json(body)).into_response()
}

/// The API routes, plus CORS and static UI assets when configured.
pub fn router(state: Arc<ServiceState>, service: &ServiceSection) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/ask", post(ask))
        .route("/api/search", post(search))
        .route("/api/ingest", post(ingest))
        .with_state(state);
    if let Some(dir) = &service.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if !service.cors_allowed_origins.is_empty() {
        let origins: Vec<HeaderValue> = service
            .cors_allowed_origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origins)
                .allow_methods(Any)
                .allow_headers(Any),
        );
    }
    app
}

/// Runs the service until Ctrl-C. Blocking clients are built before the
/// async runtime starts.
pub fn serve(config: &AppConfig) -> Result<(), ConfigError> {
    let addr = config.service.listen_addr()?;
    let state = Arc::new(ServiceState::from_config(config)?);
    let app = router(state.clone(), &config.service);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| ConfigError::Invalid(format!("bind {addr}: {e}")))?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    });
    // The last reference to the blocking clients must go outside the runtime.
    drop(runtime);
    drop(state);
    result
}
