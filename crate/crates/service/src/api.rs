//! JSON HTTP API under `/v1` for browsing books, running the pipeline and
//! driving reading sessions. Every error response has the body
//! `{"code", "message", "detail"}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fablegen_core::corpus::{Corpus, Story};
use fablegen_core::pipeline::{
    run_qag, AnswerOutcome, Backends, NextQuestion, PipelineConfig, ProgressReport, QagOutput, SessionError, SessionStore,
    DEFAULT_JUDGE_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), detail: Value::Null }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::NotFound(_) => ApiError::not_found(message),
            SessionError::QuestionNotServed(_) => ApiError::new(StatusCode::CONFLICT, "question_not_served", message),
            SessionError::AlreadyAnswered(_) => ApiError::new(StatusCode::CONFLICT, "already_answered", message),
            SessionError::StoryMismatch { .. } | SessionError::UnjudgeableGold(_) => {
                ApiError::new(StatusCode::CONFLICT, "conflict", message)
            }
            SessionError::Io { .. } | SessionError::Corrupt { .. } => ApiError::internal(message),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request("invalid JSON body").with_detail(Value::String(e.body_text()))
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request("invalid query string").with_detail(Value::String(e.body_text()))
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Server configuration.
pub struct ServiceConfig {
    pub corpus: Corpus,
    pub backends: Backends,
    pub pipeline: PipelineConfig,
    /// `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub judge_threshold: f64,
}

impl ServiceConfig {
    pub fn offline(corpus: Corpus) -> Self {
        Self {
            corpus,
            backends: Backends::offline(),
            pipeline: PipelineConfig::default(),
            data_dir: None,
            static_dir: None,
            judge_threshold: DEFAULT_JUDGE_THRESHOLD,
        }
    }
}

pub struct AppState {
    corpus: Corpus,
    backends: Backends,
    pipeline: PipelineConfig,
    store: SessionStore,
    judge_threshold: f64,
    /// Pipeline output per story at the configured top-N, shared by sessions.
    session_runs: Mutex<HashMap<String, Arc<QagOutput>>>,
}

impl AppState {
    fn story(&self, story_id: &str) -> ApiResult<&Story> {
        self.corpus.story(story_id).ok_or_else(|| ApiError::not_found(format!("no book `{story_id}`")))
    }

    async fn run(self: &Arc<Self>, story_id: &str, top_n: usize) -> ApiResult<QagOutput> {
        let state = self.clone();
        let story_id = story_id.to_string();
        tokio::task::spawn_blocking(move || {
            let story = state.story(&story_id)?;
            let config = PipelineConfig { top_n, ..state.pipeline.clone() };
            run_qag(story, &config, &state.backends).map_err(|e| ApiError::bad_request(e.to_string()))
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    async fn session_run(self: &Arc<Self>, story_id: &str) -> ApiResult<Arc<QagOutput>> {
        if let Some(hit) = self.session_runs.lock().expect("cache lock").get(story_id) {
            return Ok(hit.clone());
        }
        let out = Arc::new(self.run(story_id, self.pipeline.top_n).await?);
        Ok(self.session_runs.lock().expect("cache lock").entry(story_id.to_string()).or_insert(out).clone())
    }
}

pub fn router(config: ServiceConfig) -> anyhow::Result<Router> {
    let store = match &config.data_dir {
        Some(dir) => SessionStore::persistent(dir)?,
        None => SessionStore::in_memory(),
    };
    config.pipeline.validate()?;
    let state = Arc::new(AppState {
        corpus: config.corpus,
        backends: config.backends,
        pipeline: config.pipeline,
        store,
        judge_threshold: config.judge_threshold,
        session_runs: Mutex::new(HashMap::new()),
    });
    let api = Router::new()
        .route("/v1/books", get(list_books))
        .route("/v1/books/{id}/sections/{index}", get(get_section))
        .route("/v1/books/{id}/qag", post(run_book))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/next", get(next_question))
        .route("/v1/sessions/{id}/answer", post(answer))
        .route("/v1/sessions/{id}/progress", get(progress))
        .with_state(state);
    Ok(match config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::not_found("no such route") }),
    })
}

#[derive(Serialize)]
struct BookSummary {
    story_id: String,
    title: String,
    split: String,
    section_count: usize,
    qa_count: usize,
}

async fn list_books(State(state): State<Arc<AppState>>) -> Json<Vec<BookSummary>> {
    let books = state
        .corpus
        .stories()
        .map(|s| BookSummary {
            story_id: s.story_id.clone(),
            title: s.title.clone(),
            split: s.split.to_string(),
            section_count: s.sections.len(),
            qa_count: s.qa_pairs.len(),
        })
        .collect();
    Json(books)
}

async fn get_section(State(state): State<Arc<AppState>>, Path((id, index)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let story = state.story(&id)?;
    let index: u32 = index.parse().map_err(|_| ApiError::bad_request(format!("section index `{index}` is not a positive integer")))?;
    let section = story
        .section(index)
        .ok_or_else(|| ApiError::not_found(format!("book `{id}` has no section {index}")))?;
    Ok(Json(json!({
        "story_id": story.story_id,
        "title": story.title,
        "section_index": section.index,
        "total_sections": story.sections.len(),
        "text": section.text,
    })))
}

#[derive(Deserialize)]
struct QagQuery {
    top_n: Option<usize>,
}

async fn run_book(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<QagQuery>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(q) = query?;
    let top_n = q.top_n.unwrap_or(state.pipeline.top_n);
    if top_n == 0 {
        return Err(ApiError::bad_request("top_n must be at least 1"));
    }
    state.story(&id)?;
    let out = state.run(&id, top_n).await?;
    let sections: Vec<Value> = out
        .sections
        .iter()
        .map(|(index, pairs)| {
            let pairs: Vec<Value> = pairs
                .iter()
                .map(|p| json!({ "question": p.question, "answer": p.answer, "score": p.score, "rank_hint": p.rank_hint }))
                .collect();
            json!({ "section_index": index, "pairs": pairs })
        })
        .collect();
    Ok(Json(json!({ "story_id": id, "top_n": top_n, "sections": sections, "errors": out.errors })))
}

#[derive(Deserialize)]
struct CreateSession {
    story_id: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(req) = body?;
    let story = state.story(&req.story_id)?;
    let s = state.store.create(story)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": s.session_id,
            "story_id": s.story_id,
            "current_section": s.current_section,
            "total_sections": story.sections.len(),
            "created_at": s.created_at,
        })),
    ))
}

async fn next_question(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<NextQuestion>> {
    let session = state.store.get(&id)?;
    let run = state.session_run(&session.story_id).await?;
    let story = state.story(&session.story_id)?;
    Ok(Json(state.store.next_question(&id, story, &run, state.pipeline.top_n)?))
}

#[derive(Deserialize)]
struct AnswerRequest {
    question_id: String,
    user_answer: String,
    idempotency_key: String,
}

async fn answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> ApiResult<Json<AnswerOutcome>> {
    let Json(req) = body?;
    if req.idempotency_key.trim().is_empty() {
        return Err(ApiError::bad_request("idempotency_key must be non-empty"));
    }
    Ok(Json(state.store.answer(&id, &req.question_id, &req.user_answer, &req.idempotency_key, state.judge_threshold)?))
}

async fn progress(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ProgressReport>> {
    let session = state.store.get(&id)?;
    let total = state.story(&session.story_id)?.sections.len();
    Ok(Json(state.store.progress(&id, total)?))
}
