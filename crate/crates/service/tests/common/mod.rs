//! Shared helpers for the service integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use fablegen_core::corpus::{load_corpus, Corpus, FormatProfile};
use fablegen_service::api::{router, ServiceConfig};
use http_body_util::BodyExt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower::ServiceExt;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_corpus() -> Corpus {
    load_corpus(&repo_root().join("fixtures/corpus"), FormatProfile::CanonicalJson).expect("fixture corpus loads")
}

pub fn recording() -> bool {
    std::env::var("FABLEGEN_RECORD").is_ok_and(|v| v == "1")
}

/// Compares `actual` with a committed golden file, or writes it when
/// recording. Returns a description of the first difference.
pub fn golden_diff(path: &Path, actual: &str) -> Result<(), String> {
    if recording() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(path).map_err(|e| format!("missing golden {}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).unwrap_or(0);
    Err(format!(
        "{} differs at line {}: expected {:?}, got {:?}",
        path.display(),
        line + 1,
        expected.lines().nth(line),
        actual.lines().nth(line)
    ))
}

pub fn app(data_dir: Option<&Path>) -> Router {
    let mut config = ServiceConfig::offline(fixture_corpus());
    config.data_dir = data_dir.map(Path::to_path_buf);
    router(config).expect("router builds")
}

pub async fn send(app: &Router, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let raw = send_raw(app, method, path, body).await;
    let value = if raw.body.is_empty() { Value::Null } else { serde_json::from_str(&raw.body).unwrap() };
    (raw.status, value)
}

pub struct RawResponse {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: String,
}

pub async fn send_raw(app: &Router, method: &str, path: &str, body: Option<&Value>) -> RawResponse {
    let mut req = Request::builder().method(Method::from_bytes(method.as_bytes()).unwrap()).uri(path);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    RawResponse { status, content_type, body: String::from_utf8(bytes.to_vec()).unwrap() }
}

/// One recorded request and its masked response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub method: String,
    /// `{session}` stands for the id returned by the last session creation.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
    pub status: u16,
    pub content_type: Option<String>,
    /// Masked response, for reading.
    pub response: Value,
    /// Masked response body exactly as sent.
    pub raw_body: String,
}

const TIME_FIELDS: [&str; 4] = ["created_at", "updated_at", "answered_at", "at"];

/// Masks the raw body text by replacing the literal session id and
/// timestamp strings found in its parsed form.
fn mask_text(text: &str, raw: &Value) -> String {
    fn collect(v: &Value, out: &mut Vec<(String, &'static str)>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    match v.as_str() {
                        Some(s) if k == "session_id" => out.push((format!("\"{s}\""), "\"{session}\"")),
                        Some(s) if TIME_FIELDS.contains(&k.as_str()) => out.push((format!("\"{s}\""), "\"{timestamp}\"")),
                        _ => collect(v, out),
                    }
                }
            }
            Value::Array(items) => items.iter().for_each(|v| collect(v, out)),
            _ => {}
        }
    }
    let mut subs = Vec::new();
    collect(raw, &mut subs);
    subs.into_iter().fold(text.to_string(), |t, (from, to)| t.replace(&from, to))
}

/// Replaces session ids and timestamps with placeholders.
pub fn mask(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k == "session_id" && v.is_string() {
                    *v = Value::String("{session}".into());
                } else if TIME_FIELDS.contains(&k.as_str()) && v.is_string() {
                    *v = Value::String("{timestamp}".into());
                } else {
                    mask(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(mask),
        _ => {}
    }
}

/// Drives one request, remembering the session id it creates.
pub struct Driver {
    pub app: Router,
    pub session: Option<String>,
    pub log: Vec<Exchange>,
}

impl Driver {
    pub fn new(app: Router) -> Self {
        Self { app, session: None, log: Vec::new() }
    }

    pub async fn call(&mut self, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
        let real_path = match &self.session {
            Some(id) => path.replace("{session}", id),
            None => path.to_string(),
        };
        let resp = send_raw(&self.app, method, &real_path, body.as_ref()).await;
        let mut response: Value = if resp.body.is_empty() { Value::Null } else { serde_json::from_str(&resp.body).unwrap() };
        let raw_body = mask_text(&resp.body, &response);
        if let Some(id) = response.get("session_id").and_then(Value::as_str) {
            if method == "POST" && path == "/v1/sessions" {
                self.session = Some(id.to_string());
            }
        }
        let raw = response.clone();
        mask(&mut response);
        let status = resp.status.as_u16();
        self.log.push(Exchange {
            method: method.into(),
            path: path.into(),
            body,
            status,
            content_type: resp.content_type,
            response,
            raw_body,
        });
        (status, raw)
    }
}

/// The scripted walk recorded into the transcript golden: browsing, a bad
/// request of each kind, then a full reading session to the end.
pub async fn record_script(driver: &mut Driver) {
    use serde_json::json;
    let story = "maie-and-the-cow";
    driver.call("GET", "/v1/books", None).await;
    driver.call("GET", &format!("/v1/books/{story}/sections/2"), None).await;
    driver.call("GET", &format!("/v1/books/{story}/sections/7"), None).await;
    driver.call("GET", "/v1/books/no-such-book/sections/1", None).await;
    driver.call("POST", &format!("/v1/books/{story}/qag?top_n=2"), None).await;
    driver.call("POST", &format!("/v1/books/{story}/qag?top_n=many"), None).await;
    driver.call("POST", "/v1/sessions", Some(json!({}))).await;
    driver.call("POST", "/v1/sessions", Some(json!({ "story_id": story }))).await;
    driver.call("GET", "/v1/sessions/{session}/progress", None).await;
    let answers = ["she could not give up the idea", "a white cow came to the door", "", "they wanted to get something to eat"];
    let mut turn = 0usize;
    loop {
        let (_, next) = driver.call("GET", "/v1/sessions/{session}/next", None).await;
        match next["status"].as_str() {
            Some("question") => {
                let qid = next["question_id"].as_str().unwrap().to_string();
                if turn == 0 {
                    // a pending question is served again until answered
                    driver.call("GET", "/v1/sessions/{session}/next", None).await;
                }
                let key = format!("key-{turn}");
                let body = json!({ "question_id": qid, "user_answer": answers[turn % answers.len()], "idempotency_key": key });
                driver.call("POST", "/v1/sessions/{session}/answer", Some(body.clone())).await;
                if turn == 0 {
                    driver.call("POST", "/v1/sessions/{session}/answer", Some(body)).await;
                    let other = json!({ "question_id": qid, "user_answer": "again", "idempotency_key": "key-other" });
                    driver.call("POST", "/v1/sessions/{session}/answer", Some(other)).await;
                    let unserved = json!({ "question_id": "9-9", "user_answer": "x", "idempotency_key": "key-unserved" });
                    driver.call("POST", "/v1/sessions/{session}/answer", Some(unserved)).await;
                }
                turn += 1;
            }
            Some("advance_section") => {}
            _ => break,
        }
    }
    driver.call("GET", "/v1/sessions/{session}/progress", None).await;
    driver.call("GET", "/v1/sessions/no-such-session/next", None).await;
    driver.call("GET", "/v1/no-such-route", None).await;
}

/// Replays recorded requests against `driver` and reports the first
/// response that differs.
pub async fn replay(driver: &mut Driver, recorded: &[Exchange]) -> Result<(), String> {
    for (i, ex) in recorded.iter().enumerate() {
        driver.call(&ex.method, &ex.path, ex.body.clone()).await;
        let got = driver.log.last().unwrap();
        if got != ex {
            return Err(format!(
                "exchange {i} ({} {}) differs: expected {} {}, got {} {}",
                ex.method, ex.path, ex.status, ex.raw_body, got.status, got.raw_body
            ));
        }
    }
    Ok(())
}

pub fn transcript_path() -> PathBuf {
    repo_root().join("fixtures/golden/api_transcript.json")
}
