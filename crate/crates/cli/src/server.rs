//! Read-only HTTP/JSON service.
//!
//! | route | body |
//! |-------|------|
//! | `GET /health` | `{"status":"ok","items":N,"tags":S}` |
//! | `GET /tags` | `{"tags":[{"id","tag","count"}]}` |
//! | `GET /map?projector=pca` | map export |
//! | `GET /variance` | `{"rows":[{"rank","tag","tag_id","variance","count"}],"total"}` |
//! | `POST /retrieve` | query request → ranked result |
//! | `POST /reorder` | `{"tag","subset"?,"k"?}` → ranked result |
//!
//! Rejected requests answer `{"error":{"field","message"}}`: 400 when the
//! body is not JSON, 422 when it is JSON but names an unknown tag or item,
//! or breaks a query rule.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use dgvse::applications::{Projector, QueryRequest, ReorderRequest};
use dgvse::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::exit::{self, CliError};
use crate::payloads::{self, ServiceState};

pub const BIND_ENV: &str = "DGVSE_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub field: Option<String>,
    pub message: String,
}

impl ApiError {
    fn unprocessable(field: Option<String>, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            field,
            message: message.into(),
        }
    }

    /// Maps an engine error; `field` names the request field it refers to.
    fn from_engine(error: Error, field: Option<String>) -> Self {
        match error {
            Error::InvalidQuery { .. }
            | Error::UnknownTagName(_)
            | Error::UnknownId(_)
            | Error::UnknownTag(_)
            | Error::EmptySubset
            | Error::TooFewTags { .. }
            | Error::Config(_) => ApiError::unprocessable(field, error.to_string()),
            other => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                field: None,
                message: other.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "field": self.field, "message": self.message } });
        (self.status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
    }
}

fn ok_json<T: Serialize>(value: &T) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], payloads::to_json(value)).into_response()
}

/// Field named in a serde data error such as "missing field `k`".
fn serde_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            let message = e.to_string();
            ApiError::unprocessable(serde_field(&message).or_else(|| Some("body".into())), message)
        } else {
            ApiError {
                status: StatusCode::BAD_REQUEST,
                field: None,
                message: format!("malformed JSON: {e}"),
            }
        }
    })
}

async fn health(State(state): State<Arc<ServiceState>>) -> Response {
    ok_json(&payloads::health(&state))
}

async fn tags(State(state): State<Arc<ServiceState>>) -> Response {
    ok_json(&payloads::tags(&state))
}

async fn variance(State(state): State<Arc<ServiceState>>) -> Result<Response, ApiError> {
    let table = payloads::variance(&state).map_err(|e| ApiError::from_engine(e, None))?;
    Ok(ok_json(&table))
}

async fn map(State(state): State<Arc<ServiceState>>, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let projector: Projector = match params.get("projector") {
        Some(p) => p
            .parse()
            .map_err(|e: Error| ApiError::unprocessable(Some("projector".into()), e.to_string()))?,
        None => Projector::default(),
    };
    let export = payloads::map(&state, projector, None).map_err(|e| ApiError::from_engine(e, None))?;
    Ok(ok_json(&export))
}

async fn retrieve(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: QueryRequest = parse_body(&body)?;
    let result = payloads::retrieve(&state, &request).map_err(|e| {
        let field = request.field_of(&e);
        ApiError::from_engine(e, field)
    })?;
    Ok(ok_json(&result))
}

async fn reorder(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: ReorderRequest = parse_body(&body)?;
    let result = payloads::reorder(&state, &request).map_err(|e| {
        let field = request.field_of(&e);
        ApiError::from_engine(e, field)
    })?;
    Ok(ok_json(&result))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tags", get(tags))
        .route("/map", get(map))
        .route("/variance", get(variance))
        .route("/retrieve", post(retrieve))
        .route("/reorder", post(reorder))
        .with_state(state)
}

/// `explicit`, else `$DGVSE_BIND`, else [`DEFAULT_BIND`].
pub fn bind_address(explicit: Option<&str>) -> Result<SocketAddr, CliError> {
    let env = std::env::var(BIND_ENV).ok();
    let raw = explicit.or(env.as_deref()).unwrap_or(DEFAULT_BIND);
    raw.parse()
        .map_err(|_| CliError::new(exit::CONFIG, format!("invalid bind address '{raw}'")))
}

/// Serves until ctrl-c.
pub async fn serve(state: ServiceState, addr: SocketAddr) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::new(exit::BIND, format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::new(exit::BIND, e.to_string()))?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::new(exit::FAILURE, e.to_string()))
}
