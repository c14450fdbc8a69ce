//! HTTP/JSON service: `POST /v1/predict`, `GET /v1/health`, `GET /v1/config`.
//!
//! Errors are `{"code", "message", "field"}` objects: 400 for malformed or
//! invalid requests, 422 for unknown pinyin tokens and inputs longer than
//! the model's position table.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use pyime_core::{predict, Candidate, Lexicon, Model, PinyinMode};

use crate::config::ServiceConfig;
use crate::error::{Error, Result};

pub struct AppState {
    pub model: Model,
    pub lexicon: Lexicon,
    pub model_id: String,
    pub config: ServiceConfig,
    pub started: Instant,
}

impl AppState {
    pub fn new(model: Model, lexicon: Lexicon, model_id: String, config: ServiceConfig) -> Self {
        AppState { model, lexicon, model_id, config, started: Instant::now() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn bad(code: &'static str, field: Option<&str>, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code, message: message.into(), field: field.map(String::from) }
    }

    fn unprocessable(code: &'static str, field: &str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, code, message: message.into(), field: Some(field.into()) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "field": self.field });
        (self.status, Json(body)).into_response()
    }
}

impl From<pyime_core::Error> for ApiError {
    fn from(e: pyime_core::Error) -> Self {
        use pyime_core::Error as E;
        match e {
            E::InvalidRequest { field, message } => ApiError::bad("invalid_request", Some(field), message),
            E::UnknownToken { position, ref value, mode } => ApiError::unprocessable(
                "unknown_pinyin",
                "pinyin",
                format!("unknown {mode} pinyin token {value:?} at position {position}"),
            ),
            E::MixedModes => ApiError::bad("mixed_modes", Some("pinyin"), e.to_string()),
            E::Overflow { .. } => ApiError::unprocessable("input_too_long", "context", e.to_string()),
            other => ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                code: "internal",
                message: other.to_string(),
                field: None,
            },
        }
    }
}

/// A validated prediction request.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictRequest {
    pub context: String,
    pub pinyin: Vec<String>,
    pub mode: PinyinMode,
    pub top_k: usize,
    pub beam_size: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredictResponse {
    pub candidates: Vec<Candidate>,
    pub model_id: String,
    pub elapsed_ms: f64,
}

fn positive(obj: &Map<String, Value>, key: &'static str, default: usize) -> Result<usize, ApiError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .filter(|n| *n > 0)
            .map(|n| n as usize)
            .ok_or_else(|| ApiError::bad("invalid_field", Some(key), format!("{key} must be a positive integer"))),
    }
}

/// Field-by-field parsing so every error names the offending field.
pub fn parse_request(body: &[u8], model: &Model, cfg: &ServiceConfig) -> Result<PredictRequest, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad("malformed_json", None, format!("request body is not valid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(ApiError::bad("malformed_json", None, "request body must be a JSON object"));
    };
    const FIELDS: [&str; 5] = ["context", "pinyin", "mode", "top_k", "beam_size"];
    if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ApiError::bad("unknown_field", Some(k), format!("unknown field {k:?}")));
    }
    let context = match obj.get("context") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ApiError::bad("invalid_field", Some("context"), "context must be a string")),
    };
    let pinyin: Vec<String> = match obj.get("pinyin") {
        Some(Value::String(s)) => s.split_whitespace().map(String::from).collect(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(String::from))
            .collect::<Option<_>>()
            .ok_or_else(|| ApiError::bad("invalid_field", Some("pinyin"), "pinyin must be an array of strings"))?,
        None | Some(Value::Null) => return Err(ApiError::bad("missing_field", Some("pinyin"), "pinyin is required")),
        Some(_) => return Err(ApiError::bad("invalid_field", Some("pinyin"), "pinyin must be an array of strings")),
    };
    if pinyin.is_empty() {
        return Err(ApiError::bad("invalid_field", Some("pinyin"), "at least one pinyin token is required"));
    }
    let mode = match obj.get("mode") {
        None | Some(Value::Null) => model.vocab.default_mode(),
        Some(Value::String(s)) => PinyinMode::from_name(s)
            .ok_or_else(|| ApiError::bad("invalid_field", Some("mode"), "mode must be \"perfect\" or \"abbrev\""))?,
        Some(_) => return Err(ApiError::bad("invalid_field", Some("mode"), "mode must be \"perfect\" or \"abbrev\"")),
    };
    let beam_size = positive(&obj, "beam_size", cfg.beam_size)?;
    if beam_size > cfg.max_beam_size {
        return Err(ApiError::bad("invalid_field", Some("beam_size"), format!("beam_size must be at most {}", cfg.max_beam_size)));
    }
    let top_k = positive(&obj, "top_k", cfg.top_k.min(beam_size))?;
    if top_k > beam_size {
        return Err(ApiError::bad("invalid_field", Some("top_k"), format!("top_k {top_k} exceeds beam_size {beam_size}")));
    }
    Ok(PredictRequest { context, pinyin, mode, top_k, beam_size })
}

/// Decodes a validated request; shared by the service and the CLI.
pub fn run_predict(state: &AppState, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
    let start = Instant::now();
    let candidates = predict(&state.model, &state.lexicon, &req.context, &req.pinyin, req.mode, req.beam_size, req.top_k)?;
    Ok(PredictResponse {
        candidates,
        model_id: state.model_id.clone(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

async fn predict_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let req = parse_request(&body, &state.model, &state.config)?;
    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || run_predict(&worker, &req))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, code: "internal", message: e.to_string(), field: None })?
        .map(Json)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let lex = &state.lexicon;
    Json(json!({
        "status": "ok",
        "model_id": state.model_id,
        "variant": state.model.config.variant,
        "modes": state.model.vocab.modes(),
        "n_layers": state.model.config.n_layers,
        "lexicon": {
            "chars": lex.chars().len(),
            "readings": lex.reading_count(),
            "syllables": lex.syllables().len(),
            "abbreviation_keys": lex.abbreviation_keys().len(),
        },
        "uptime_s": state.started.elapsed().as_secs_f64(),
    }))
}

async fn config(State(state): State<Arc<AppState>>) -> Json<Value> {
    let c = &state.config;
    Json(json!({
        "beam_size": c.beam_size,
        "top_k": c.top_k.min(c.beam_size),
        "max_beam_size": c.max_beam_size,
        "modes": state.model.vocab.modes().list(),
        "default_mode": state.model.vocab.default_mode(),
        "max_positions": state.model.config.max_positions,
        "score": "sum of natural-log probabilities over the target characters",
    }))
}

async fn not_found() -> ApiError {
    ApiError { status: StatusCode::NOT_FOUND, code: "not_found", message: "no such endpoint".into(), field: None }
}

async fn method_not_allowed() -> ApiError {
    ApiError {
        status: StatusCode::METHOD_NOT_ALLOWED,
        code: "method_not_allowed",
        message: "method not allowed for this endpoint".into(),
        field: None,
    }
}

async fn log_request(req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let resp = next.run(req).await;
    tracing::info!(
        target: "pyime::request",
        method,
        path,
        status = resp.status().as_u16(),
        ms = start.elapsed().as_secs_f64() * 1e3,
    );
    resp
}

fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE])
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(&state.config.cors_origins);
    Router::new()
        .route("/v1/predict", post(predict_handler))
        .route("/v1/health", get(health))
        .route("/v1/config", get(config))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
        .layer(middleware::from_fn(log_request))
        .layer(cors)
}

/// Binds and serves until Ctrl-C or SIGTERM, then drains in-flight requests.
pub async fn serve(state: AppState) -> Result<()> {
    let addr: SocketAddr = state
        .config
        .bind
        .parse()
        .map_err(|e| Error::Invalid(format!("bind address {:?}: {e}", state.config.bind)))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Invalid(format!("cannot listen on {addr}: {e}")))?;
    tracing::info!(target: "pyime::service", addr = %listener.local_addr().map_err(Error::io("socket"))?, model_id = %state.model_id, "listening");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(Error::io("socket"))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
