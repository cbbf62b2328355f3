use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_create_session, parse_signal_request, SessionManager};
use crate::error::{Error, Result};

/// Environment variable overriding the bind address.
pub const BIND_ENV: &str = "OFITRADE_BIND";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub bind: String,
    /// Directory for per-session request journals; none when unset.
    pub journal_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            journal_dir: None,
        }
    }
}

impl ServeConfig {
    /// Reads a TOML config (when given) and applies the bind override.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            }
            None => Self::default(),
        };
        if let Ok(bind) = std::env::var(BIND_ENV) {
            cfg.bind = bind;
        }
        Ok(cfg)
    }
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, field) = match &self.0 {
            Error::Validation { field, .. } => (StatusCode::BAD_REQUEST, Some(field.clone())),
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, None),
            Error::Ordering { .. } => (StatusCode::CONFLICT, None),
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) | Error::Artifact { .. } => {
                (StatusCode::BAD_REQUEST, None)
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        let body = json!({"error": self.0.to_string(), "field": field});
        (status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

fn parse_json(body: &Bytes) -> std::result::Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError(Error::Validation {
            field: "body".into(),
            message: e.to_string(),
        })
    })
}

type Shared = Arc<SessionManager>;

async fn create(State(m): State<Shared>, body: Bytes) -> std::result::Result<Response, ApiError> {
    let req = parse_create_session(&parse_json(&body)?)?;
    let id = tokio::task::spawn_blocking({
        let m = m.clone();
        move || m.create(&req)
    })
    .await
    .map_err(|e| ApiError(Error::Invariant(e.to_string())))??;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))).into_response())
}

async fn signal(
    State(m): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> std::result::Result<Response, ApiError> {
    let req = parse_signal_request(&parse_json(&body)?)?;
    let resp = m.signal(&id, &req)?;
    Ok(Json(resp).into_response())
}

async fn report(
    State(m): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Response, ApiError> {
    Ok(Json(m.report(&id)?).into_response())
}

async fn delete(
    State(m): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Response, ApiError> {
    m.remove(&id)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

pub fn router(manager: Shared) -> Router {
    Router::new()
        .route("/v1/session", post(create))
        .route("/v1/session/{id}/signal", post(signal))
        .route("/v1/session/{id}/report", get(report))
        .route("/v1/session/{id}", axum::routing::delete(delete))
        .with_state(manager)
}

/// Binds and serves until ctrl-c.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let addr: SocketAddr = cfg
        .bind
        .parse()
        .map_err(|e| Error::Config(format!("bad bind address `{}`: {e}", cfg.bind)))?;
    if let Some(dir) = &cfg.journal_dir {
        std::fs::create_dir_all(dir)?;
    }
    let manager = Arc::new(SessionManager::new(cfg.journal_dir.clone()));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "signal service listening");
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
