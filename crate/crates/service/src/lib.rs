//! JSON-over-HTTP front end for an [`AppraisalEngine`].
//!
//! The engine is swapped in atomically once loaded; until then every
//! endpoint except `/api/spec` answers 503.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use mugrep::appraisal::{AppraisalEngine, AppraisalRequest, AppraisalResponse, CommunityDetail, CommunitySummary};
use mugrep::MugrepError;

mod openapi;

pub use openapi::openapi;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli_service.md")]
mod book {}

pub const ADDR_ENV: &str = "MUGREP_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

/// Listen address: the flag if given, else `MUGREP_ADDR`, else the default.
pub fn resolve_addr(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(ADDR_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

/// Shared handle on the current engine, empty while loading.
#[derive(Clone, Default)]
pub struct AppState {
    engine: Arc<RwLock<Option<Arc<AppraisalEngine>>>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(engine: AppraisalEngine) -> Self {
        let state = Self::default();
        state.install(engine);
        state
    }

    /// Replaces the whole snapshot; in-flight requests keep the old one.
    pub fn install(&self, engine: AppraisalEngine) {
        *self.engine.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<AppraisalEngine>> {
        self.engine.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn require(&self) -> Result<Arc<AppraisalEngine>, ApiError> {
        self.engine().ok_or_else(|| ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            body: ErrorBody::new("loading", "model not loaded yet"),
        })
    }
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ErrorBody {
    fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{status}: {}", body.message)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl From<MugrepError> for ApiError {
    fn from(e: MugrepError) -> Self {
        let message = e.to_string();
        let (status, body) = match e {
            MugrepError::UnknownCommunity(_) => (StatusCode::NOT_FOUND, ErrorBody::new("unknown_community", message)),
            MugrepError::InvalidAttribute { field, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                ErrorBody {
                    field: Some(field),
                    ..ErrorBody::new("invalid_attribute", message)
                },
            ),
            MugrepError::EmptyQuery => (StatusCode::BAD_REQUEST, ErrorBody::new("empty_query", message)),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, ErrorBody::new("internal", message)),
        };
        ApiError { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub checkpoint_version: u32,
    pub n_communities: usize,
    pub n_events: usize,
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/spec", get(spec))
        .route("/api/communities", get(search))
        .route("/api/communities/{id}", get(community))
        .route("/api/appraise", post(appraise))
        .fallback(not_found)
        .layer(cors)
        .with_state(state)
}

/// Serves `state` on `addr` until the process ends.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    serve_listener(tokio::net::TcpListener::bind(addr).await?, state).await
}

pub async fn serve_listener(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn health(State(state): State<AppState>) -> Result<Json<Health>, ApiError> {
    let info = state.require()?.info();
    Ok(Json(Health {
        status: "ready".into(),
        checkpoint_version: info.checkpoint_version,
        n_communities: info.n_communities,
        n_events: info.n_events,
    }))
}

async fn spec(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(openapi(state.engine().as_deref()))
}

async fn search(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Vec<CommunitySummary>>, ApiError> {
    let engine = state.require()?;
    let q = params.get("q").map(String::as_str).unwrap_or("");
    Ok(Json(engine.search(q)?))
}

async fn community(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<CommunityDetail>, ApiError> {
    let engine = state.require()?;
    let id = id.parse().map_err(|_| ApiError {
        status: StatusCode::NOT_FOUND,
        body: ErrorBody::new("unknown_community", format!("unknown community {id}")),
    })?;
    Ok(Json(engine.community(id)?))
}

async fn appraise(State(state): State<AppState>, body: Bytes) -> Result<Json<AppraisalResponse>, ApiError> {
    let engine = state.require()?;
    let request = parse_request(&body)?;
    Ok(Json(engine.appraise(&request)?))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        body: ErrorBody::new("not_found", "no such endpoint"),
    }
}

/// Malformed JSON is a 400; well-formed JSON of the wrong shape is a 422
/// naming the field when serde reports one.
pub fn parse_request(body: &[u8]) -> Result<AppraisalRequest, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody {
                    field: offending_field(&e.to_string()),
                    ..ErrorBody::new("invalid_request", e.to_string())
                },
            }
        } else {
            ApiError {
                status: StatusCode::BAD_REQUEST,
                body: ErrorBody::new("malformed_json", e.to_string()),
            }
        }
    })
}

/// Field named in serde's "missing field `x`" / "unknown field `x`" messages.
fn offending_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}
