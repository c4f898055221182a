use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use erkang_core::engine::{ConsultOverrides, Engine, EngineError, TurnResult};
use erkang_core::format::{render, RenderTarget};
use erkang_core::Locale;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    retriable: bool,
}

impl ApiError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "validation",
            message: message.into(),
            retriable: false,
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::NotFound(_) => StatusCode::NOT_FOUND,
            EngineError::Conflict(_) | EngineError::Blocked => StatusCode::CONFLICT,
            EngineError::Validation(_) => StatusCode::BAD_REQUEST,
            EngineError::Upstream { .. } => StatusCode::BAD_GATEWAY,
            EngineError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            code: e.code(),
            message: e.to_string(),
            retriable: e.retriable(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::warn!("{}: {}", self.code, self.message);
        }
        let body = json!({"error": {"code": self.code, "message": self.message, "retriable": self.retriable}});
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    locale: Option<Locale>,
    consult: Option<ConsultOverrides>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostMessage {
    text: String,
    region_code: Option<String>,
}

#[derive(Debug, Serialize)]
struct TurnReply {
    #[serde(flatten)]
    result: TurnResult,
    html: String,
}

fn parse_body<T: DeserializeOwned + Default>(body: &[u8]) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

async fn blocking<R: Send + 'static>(
    engine: &Arc<Engine>,
    f: impl FnOnce(&Engine) -> Result<R, EngineError> + Send + 'static,
) -> Result<R, ApiError> {
    let engine = engine.clone();
    match tokio::task::spawn_blocking(move || f(&engine)).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: format!("worker failed: {e}"),
            retriable: true,
        }),
    }
}

async fn create_session(
    State(engine): State<Arc<Engine>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let id = blocking(&engine, move |e| e.create_session(req.locale, req.consult)).await?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": id}))).into_response())
}

async fn post_message(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnReply>, ApiError> {
    let req: PostMessage = parse_required(&body)?;
    let result = blocking(&engine, move |e| {
        e.handle_turn(&id, &req.text, req.region_code.as_deref())
    })
    .await?;
    let html = render(&result.response, RenderTarget::Html);
    Ok(Json(TurnReply { result, html }))
}

async fn get_session(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let view = blocking(&engine, move |e| e.get_transcript(&id)).await?;
    Ok(Json(view).into_response())
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "kb_chunks": engine.kb_chunks(),
        "backend_profile": engine.backend().profile().as_str(),
    }))
}

async fn fallback() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such route".into(),
        retriable: false,
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/health", get(health))
        .fallback(fallback)
        .with_state(engine)
}
