//! HTTP/JSON front end for the survey store.

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use transferlab::survey::{
    Choice, NextStep, RespondentProfile, SessionError, SessionStore, Statement, StoreError,
};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("block {0} is not part of this session")]
    UnknownBlock(usize),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::UnknownBlock(_) => StatusCode::NOT_FOUND,
            ApiError::Store(e) => match e {
                StoreError::UnknownSession(_) => StatusCode::NOT_FOUND,
                StoreError::DuplicateSession(_) => StatusCode::CONFLICT,
                StoreError::Session(s) => match s {
                    SessionError::UnknownQuestion(_) => StatusCode::NOT_FOUND,
                    SessionError::InvalidLevel(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    SessionError::MalformedCatalog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
                    _ => StatusCode::CONFLICT,
                },
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        };
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// What the client should render next; `done` once the profile is in.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Next {
    Step(NextStep),
    Done { screen: String },
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateSession {
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub next: Next,
}

#[derive(Debug, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub choice: Choice,
}

#[derive(Debug, Deserialize)]
pub struct Revision {
    pub choice: Choice,
}

#[derive(Debug, Deserialize)]
pub struct TextAnswer {
    pub statement: Statement,
    pub level: u8,
}

type AppState = Arc<SessionStore>;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/answers/{question_id}", put(revise))
        .route("/sessions/{id}/review/{block}/confirm", post(confirm))
        .route("/sessions/{id}/text", post(text))
        .route("/sessions/{id}/profile", post(profile))
        .route("/export/responses.csv", get(export_responses))
        .route("/export/sessions.csv", get(export_sessions))
        .with_state(store)
}

fn next_of(store: &SessionStore, id: &str) -> ApiResult<Next> {
    match store.next_step(id) {
        Ok(step) => Ok(Next::Step(step)),
        Err(StoreError::Session(SessionError::SessionComplete)) => Ok(Next::Done { screen: "done".into() }),
        Err(e) => Err(e.into()),
    }
}

async fn create(State(store): State<AppState>, body: Option<Json<CreateSession>>) -> ApiResult<(StatusCode, Json<Created>)> {
    let seed = body.and_then(|Json(b)| b.seed);
    let s = store.create_session(seed)?;
    let next = next_of(&store, &s.session_id)?;
    Ok((StatusCode::CREATED, Json(Created { session_id: s.session_id, next })))
}

async fn next(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Next>> {
    Ok(Json(next_of(&store, &id)?))
}

async fn answer(State(store): State<AppState>, Path(id): Path<String>, Json(a): Json<Answer>) -> ApiResult<Json<Next>> {
    store.record_answer(&id, &a.question_id, a.choice)?;
    Ok(Json(next_of(&store, &id)?))
}

async fn revise(
    State(store): State<AppState>,
    Path((id, question_id)): Path<(String, String)>,
    Json(r): Json<Revision>,
) -> ApiResult<Json<Next>> {
    store.revise_answer(&id, &question_id, r.choice)?;
    Ok(Json(next_of(&store, &id)?))
}

/// `block` is the 1-based block number shown on the review screen.
async fn confirm(State(store): State<AppState>, Path((id, block)): Path<(String, usize)>) -> ApiResult<Json<Next>> {
    let b = store.session(&id)?.block_at(block).ok_or(ApiError::UnknownBlock(block))?;
    store.confirm_review(&id, b)?;
    Ok(Json(next_of(&store, &id)?))
}

async fn text(State(store): State<AppState>, Path(id): Path<String>, Json(t): Json<TextAnswer>) -> ApiResult<Json<Next>> {
    store.record_text(&id, t.statement, t.level)?;
    Ok(Json(next_of(&store, &id)?))
}

async fn profile(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(p): Json<RespondentProfile>,
) -> ApiResult<Json<Next>> {
    store.record_profile(&id, p)?;
    Ok(Json(next_of(&store, &id)?))
}

fn csv_response(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

async fn export_responses(State(store): State<AppState>) -> ApiResult<Response> {
    let mut buf = Vec::new();
    store.export_responses(&mut buf)?;
    Ok(csv_response(buf))
}

async fn export_sessions(State(store): State<AppState>) -> ApiResult<Response> {
    let mut buf = Vec::new();
    store.export_sessions(&mut buf)?;
    Ok(csv_response(buf))
}

/// Serves `store` on `addr` until the process ends.
pub async fn serve(store: Arc<SessionStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}
