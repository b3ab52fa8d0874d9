// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! HTTP API for running text-annotation surveys.
//!
//! Participants are identified only by the session token in the URL path.
//! Admin endpoints require `Authorization: Bearer <admin token>`. Request
//! and response bodies are JSON, the same syntax as survey spec files.
//!
//! Each session mutation is a single [`Store::apply`] call, which performs
//! load, transition and save under the store's write lock, so concurrent
//! requests for one token are applied one after the other.

mod error;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use bytes::Bytes;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tassy_core::session::{OpOutcome, Session, SessionOp, SessionToken, View};
use tassy_core::store::PutSpec;
use tassy_core::{spec, AnswerValue, Store, SurveySpec, WordSpan};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub use error::{ApiError, ERROR_CODES};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    admin_token: Arc<str>,
}

impl AppState {
    pub fn new(store: Arc<Store>, admin_token: impl Into<Arc<str>>) -> Self {
        Self {
            store,
            admin_token: admin_token.into(),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/admin/surveys", post(create_survey))
        .route("/api/admin/surveys/{survey_id}/export", get(export))
        .route("/api/surveys/{survey_id}/sessions", post(create_session))
        .route("/api/sessions/{token}/current", get(current))
        .route(
            "/api/sessions/{token}/answers/{question_id}/{input_id}",
            put(record_answer),
        )
        // POST takes a question id, DELETE an annotation id
        .route(
            "/api/sessions/{token}/annotations/{id}",
            post(add_annotation).delete(remove_annotation),
        )
        .route("/api/sessions/{token}/next", post(advance))
        .route("/api/sessions/{token}/prev", post(go_back))
        .route(
            "/api/sessions/{token}/sections/{section_id}/submit",
            post(submit_section),
        )
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    app.layer(TraceLayer::new_for_http())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

/// Runs a store operation off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
{
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn require_admin(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    match presented {
        Some(t) if constant_time_eq(t.as_bytes(), state.admin_token.as_bytes()) => Ok(()),
        _ => Err(ApiError::unauthorized()),
    }
}

fn parse_token(raw: &str) -> Result<SessionToken, ApiError> {
    SessionToken::parse(raw).ok_or_else(|| ApiError::unknown_session(raw))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

#[derive(Serialize)]
struct ViewDoc<'a> {
    complete: bool,
    session_token: &'a str,
    #[serde(flatten)]
    view: View<'a>,
}

/// The `/current` document, or the completion document once every section
/// has been submitted.
fn view_document(session: &Session, spec: &SurveySpec) -> Result<Value, ApiError> {
    if session.is_complete() {
        return Ok(completion_document(session));
    }
    let view = session.current_view(spec)?;
    Ok(serde_json::to_value(ViewDoc {
        complete: false,
        session_token: session.session_token.as_str(),
        view,
    })
    .expect("view serializes"))
}

fn completion_document(session: &Session) -> Value {
    json!({
        "complete": true,
        "session_token": session.session_token.as_str(),
        "survey_id": session.survey_id,
    })
}

async fn create_survey(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    require_admin(&state, &headers)?;
    let raw = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let parsed = spec::parse_spec_structure(raw)?;
    let violations = spec::validate_spec(&parsed);
    if !violations.is_empty() {
        return Err(ApiError::invalid_spec(&violations));
    }
    let survey_id = parsed.survey_id.clone();
    let outcome = blocking(&state, move |store| Ok(store.put_spec(&parsed)?)).await?;
    let status = match outcome {
        PutSpec::Created => StatusCode::CREATED,
        PutSpec::Unchanged => StatusCode::OK,
    };
    Ok((status, Json(json!({ "survey_id": survey_id }))).into_response())
}

async fn create_session(
    State(state): State<AppState>,
    Path(survey_id): Path<String>,
) -> Result<Response, ApiError> {
    let entropy: u128 = rand::random();
    let session =
        blocking(&state, move |store| Ok(store.create_session(&survey_id, entropy, Utc::now())?))
            .await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_token": session.session_token.as_str() })),
    )
        .into_response())
}

async fn current(
    State(state): State<AppState>,
    Path(token): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let token = parse_token(&token)?;
    let doc = blocking(&state, move |store| {
        let session = store.load_session(token.as_str())?;
        if session.is_complete() {
            return Err(tassy_core::SessionError::SessionComplete.into());
        }
        let spec = store.get_spec(&session.survey_id)?;
        view_document(&session, &spec)
    })
    .await?;
    Ok(Json(doc))
}

/// Applies one operation and returns the resulting session with its spec.
async fn apply(
    state: &AppState,
    token: &str,
    op: SessionOp,
) -> Result<(Session, SurveySpec, OpOutcome), ApiError> {
    let token = parse_token(token)?;
    blocking(state, move |store| Ok(store.apply(&token, &op, Utc::now())?)).await
}

async fn record_answer(
    State(state): State<AppState>,
    Path((token, question_id, input_id)): Path<(String, String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let value: AnswerValue = parse_body(&body)?;
    let op = SessionOp::RecordAnswer {
        question_id,
        input_id,
        value,
    };
    let (session, spec, _) = apply(&state, &token, op).await?;
    let nav = session.current_view(&spec)?.nav;
    Ok(Json(json!({ "nav": nav })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Selection {
    raw_start: usize,
    raw_end: usize,
}

#[derive(Serialize)]
struct AnnotationDoc {
    annotation_id: String,
    question_id: String,
    span: WordSpan,
    extracted: String,
    word_count: usize,
}

async fn add_annotation(
    State(state): State<AppState>,
    Path((token, question_id)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let sel: Selection = parse_body(&body)?;
    let op = SessionOp::AddAnnotation {
        question_id,
        raw_start: sel.raw_start,
        raw_end: sel.raw_end,
    };
    let (_, _, outcome) = apply(&state, &token, op).await?;
    let OpOutcome::Annotated(a) = outcome else {
        return Err(ApiError::internal("annotation was not created"));
    };
    let doc = AnnotationDoc {
        annotation_id: a.annotation_id,
        question_id: a.question_id,
        span: a.span,
        extracted: a.extracted,
        word_count: a.word_count,
    };
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn remove_annotation(
    State(state): State<AppState>,
    Path((token, annotation_id)): Path<(String, String)>,
) -> Result<StatusCode, ApiError> {
    apply(&state, &token, SessionOp::RemoveAnnotation { annotation_id }).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn navigate(state: &AppState, token: &str, op: SessionOp) -> Result<Json<Value>, ApiError> {
    let (session, spec, _) = apply(state, token, op).await?;
    Ok(Json(view_document(&session, &spec)?))
}

async fn advance(
    State(state): State<AppState>,
    Path(token): Path<String>,
) -> Result<Json<Value>, ApiError> {
    navigate(&state, &token, SessionOp::Advance).await
}

async fn go_back(
    State(state): State<AppState>,
    Path(token): Path<String>,
) -> Result<Json<Value>, ApiError> {
    navigate(&state, &token, SessionOp::GoBack).await
}

async fn submit_section(
    State(state): State<AppState>,
    Path((token, section_id)): Path<(String, String)>,
) -> Result<Json<Value>, ApiError> {
    navigate(&state, &token, SessionOp::SubmitSection { section_id }).await
}

fn attachment_name(survey_id: &str, suffix: &str) -> String {
    let safe: String = survey_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("attachment; filename=\"{safe}-{suffix}\"")
}

async fn export(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(survey_id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    require_admin(&state, &headers)?;
    let completed_only = match params.get("completed_only").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "completed_only must be true or false, not '{other}'"
            )))
        }
    };
    let format = params.get("format").map(String::as_str).unwrap_or("csv");
    let (body, content_type, suffix) = match format {
        "csv" => {
            let table = params.get("table").map(String::as_str).unwrap_or("annotations");
            if table != "annotations" && table != "responses" {
                return Err(ApiError::bad_request(format!(
                    "table must be annotations or responses, not '{table}'"
                )));
            }
            let id = survey_id.clone();
            let (annotations, responses) =
                blocking(&state, move |store| Ok(store.export_csv(&id, completed_only)?)).await?;
            if table == "annotations" {
                (annotations, "text/csv; charset=utf-8", "annotations.csv")
            } else {
                (responses, "text/csv; charset=utf-8", "responses.csv")
            }
        }
        "full" => {
            let id = survey_id.clone();
            let dump = blocking(&state, move |store| Ok(store.export_full(&id)?)).await?;
            (dump, "application/json", "full.json")
        }
        other => {
            return Err(ApiError::bad_request(format!(
                "format must be csv or full, not '{other}'"
            )))
        }
    };
    let disposition = HeaderValue::from_str(&attachment_name(&survey_id, suffix))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        body,
    )
        .into_response())
}

/// Binds and serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}
