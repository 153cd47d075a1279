use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::judge::{judge_answer, Verdict};
use super::QagOutput;
use crate::corpus::Story;
use crate::ranker::RankedQAPair;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("question `{0}` was not served in this session")]
    QuestionNotServed(String),
    #[error("question `{0}` was already answered")]
    AlreadyAnswered(String),
    #[error("question `{0}` has no usable gold answer")]
    UnjudgeableGold(String),
    #[error("session belongs to story `{expected}`, not `{got}`")]
    StoryMismatch { expected: String, got: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt session log {path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServedQuestion {
    pub question_id: String,
    pub section_index: u32,
    /// 1-based position in the section's ranked list.
    pub rank: usize,
    pub question: String,
    pub is_followup: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum NextQuestion {
    Question(ServedQuestion),
    AdvanceSection { from_section: u32, to_section: u32 },
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskedEntry {
    pub question_id: String,
    pub section_index: u32,
    pub question: String,
    pub gold_answer: String,
    pub user_answer: String,
    pub verdict: Verdict,
    pub is_followup: bool,
    /// Whether a follow-up has been served for this question.
    pub followup_used: bool,
    pub idempotency_key: String,
    pub answered_at: DateTime<Utc>,
}

/// Append-only log records; replaying them rebuilds a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum SessionEvent {
    Created { session_id: String, story_id: String, at: DateTime<Utc> },
    Served { question: ServedQuestion, gold_answer: String, at: DateTime<Utc> },
    Answered { question_id: String, user_answer: String, idempotency_key: String, verdict: Verdict, at: DateTime<Utc> },
    Advanced { to_section: u32, at: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingSession {
    pub session_id: String,
    pub story_id: String,
    pub current_section: u32,
    pub served: Vec<ServedQuestion>,
    #[serde(skip)]
    gold: HashMap<String, String>,
    pub asked: Vec<AskedEntry>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl ReadingSession {
    fn apply(&mut self, event: &SessionEvent) {
        match event {
            SessionEvent::Created { .. } => {}
            SessionEvent::Served { question, gold_answer, at } => {
                if let Some(parent) = &question.followup_of {
                    if let Some(e) = self.asked.iter_mut().find(|e| &e.question_id == parent) {
                        e.followup_used = true;
                    }
                }
                self.gold.insert(question.question_id.clone(), gold_answer.clone());
                self.served.push(question.clone());
                self.updated_at = *at;
            }
            SessionEvent::Answered { question_id, user_answer, idempotency_key, verdict, at } => {
                let served = self.served.iter().find(|s| &s.question_id == question_id);
                self.asked.push(AskedEntry {
                    question_id: question_id.clone(),
                    section_index: served.map_or(self.current_section, |s| s.section_index),
                    question: served.map(|s| s.question.clone()).unwrap_or_default(),
                    gold_answer: self.gold.get(question_id).cloned().unwrap_or_default(),
                    user_answer: user_answer.clone(),
                    verdict: *verdict,
                    is_followup: served.is_some_and(|s| s.is_followup),
                    followup_used: false,
                    idempotency_key: idempotency_key.clone(),
                    answered_at: *at,
                });
                self.updated_at = *at;
            }
            SessionEvent::Advanced { to_section, at } => {
                self.current_section = *to_section;
                self.updated_at = *at;
            }
        }
    }

    /// Rebuilds a session from its log; the first event must be `Created`.
    pub fn replay(events: &[SessionEvent]) -> Option<Self> {
        let SessionEvent::Created { session_id, story_id, at } = events.first()? else { return None };
        let mut s = ReadingSession {
            session_id: session_id.clone(),
            story_id: story_id.clone(),
            current_section: 1,
            served: Vec::new(),
            gold: HashMap::new(),
            asked: Vec::new(),
            created_at: *at,
            updated_at: *at,
        };
        for e in &events[1..] {
            s.apply(e);
        }
        Some(s)
    }

    fn is_answered(&self, question_id: &str) -> bool {
        self.asked.iter().any(|e| e.question_id == question_id)
    }

    fn is_served(&self, question_id: &str) -> bool {
        self.served.iter().any(|s| s.question_id == question_id)
    }

    /// Decides what to serve next without mutating; the returned event, if
    /// any, must be recorded.
    fn plan_next(&self, story: &Story, qag: &QagOutput, top_n: usize, now: DateTime<Utc>) -> (NextQuestion, Option<SessionEvent>) {
        if let Some(pending) = self.served.iter().find(|s| !self.is_answered(&s.question_id)) {
            return (NextQuestion::Question(pending.clone()), None);
        }
        let section = self.current_section;
        let last_section = story.sections.last().map_or(0, |s| s.index);
        if section > last_section {
            return (NextQuestion::Finished, None);
        }
        let empty = Vec::new();
        let pool = qag.pools.get(&section).or_else(|| qag.sections.get(&section)).unwrap_or(&empty);
        let serve = |rank0: usize, followup_of: Option<String>| {
            let pair: &RankedQAPair = &pool[rank0];
            let question = ServedQuestion {
                question_id: question_id(section, rank0),
                section_index: section,
                rank: rank0 + 1,
                question: pair.question.clone(),
                is_followup: followup_of.is_some(),
                followup_of,
            };
            let event = SessionEvent::Served { question: question.clone(), gold_answer: pair.answer.clone(), at: now };
            (NextQuestion::Question(question), Some(event))
        };

        if let Some(last) = self.asked.last().filter(|e| e.section_index == section && !e.is_followup && !e.followup_used) {
            let parent_rank0 = self.served.iter().find(|s| s.question_id == last.question_id).map(|s| s.rank - 1);
            if let Some(p) = parent_rank0.filter(|&p| p < pool.len()) {
                let followup = (p + 1..pool.len()).find(|&j| {
                    !self.is_served(&question_id(section, j))
                        && match (&pool[p].provenance, &pool[j].provenance) {
                            (Some(a), Some(b)) => a.shares_provenance(b),
                            _ => false,
                        }
                });
                if let Some(j) = followup {
                    return serve(j, Some(last.question_id.clone()));
                }
            }
        }
        if let Some(next) = (0..pool.len().min(top_n)).find(|&j| !self.is_served(&question_id(section, j))) {
            return serve(next, None);
        }
        if section < last_section {
            let to_section = section + 1;
            (NextQuestion::AdvanceSection { from_section: section, to_section }, Some(SessionEvent::Advanced { to_section, at: now }))
        } else {
            (NextQuestion::Finished, Some(SessionEvent::Advanced { to_section: section + 1, at: now }))
        }
    }
}

fn question_id(section: u32, rank0: usize) -> String {
    format!("{section}-{}", rank0 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub question_id: String,
    pub verdict: Verdict,
    pub gold_answer: String,
    /// Set when the idempotency key was already used; nothing new was recorded.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub session_id: String,
    pub story_id: String,
    pub current_section: u32,
    pub total_sections: usize,
    pub finished: bool,
    pub answered: usize,
    pub correct: usize,
    pub entries: Vec<AskedEntry>,
}

struct Slot {
    session: ReadingSession,
    log: Option<PathBuf>,
}

/// Sessions kept in memory and, with a data directory, persisted as one
/// JSON-lines event log per session. Calls on one session are serialized.
pub struct SessionStore {
    data_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Slot>>>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.display().to_string(), source }
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self { data_dir: None, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn persistent(data_dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir: PathBuf = data_dir.into().join("sessions");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { data_dir: Some(dir), sessions: Mutex::new(HashMap::new()) })
    }

    fn log_path(&self, session_id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{session_id}.jsonl")))
    }

    fn append(slot: &mut Slot, event: SessionEvent) -> Result<(), SessionError> {
        if let Some(path) = &slot.log {
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
            let line = serde_json::to_string(&event).expect("event serializes") + "\n";
            f.write_all(line.as_bytes()).map_err(io_err(path))?;
        }
        slot.session.apply(&event);
        Ok(())
    }

    pub fn create(&self, story: &Story) -> Result<ReadingSession, SessionError> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let created = SessionEvent::Created { session_id: session_id.clone(), story_id: story.story_id.clone(), at: Utc::now() };
        let log = self.log_path(&session_id);
        if let Some(path) = &log {
            let line = serde_json::to_string(&created).expect("event serializes") + "\n";
            fs::write(path, line).map_err(io_err(path))?;
        }
        let slot = Slot { session: ReadingSession::replay(std::slice::from_ref(&created)).expect("created event"), log };
        let session = slot.session.clone();
        self.sessions.lock().expect("store lock").insert(session_id, Arc::new(Mutex::new(slot)));
        Ok(session)
    }

    /// Replays a session log from disk.
    pub fn read_log(path: &Path) -> Result<Vec<SessionEvent>, SessionError> {
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        raw.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| SessionError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    fn slot(&self, session_id: &str) -> Result<Arc<Mutex<Slot>>, SessionError> {
        let mut map = self.sessions.lock().expect("store lock");
        if let Some(s) = map.get(session_id) {
            return Ok(s.clone());
        }
        let valid_id = !session_id.is_empty() && session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let path = self.log_path(session_id).filter(|p| valid_id && p.exists()).ok_or_else(|| SessionError::NotFound(session_id.to_string()))?;
        let events = Self::read_log(&path)?;
        let session = ReadingSession::replay(&events).ok_or_else(|| SessionError::Corrupt {
            path: path.display().to_string(),
            line: 1,
            message: "log does not start with a created event".into(),
        })?;
        let slot = Arc::new(Mutex::new(Slot { session, log: Some(path) }));
        map.insert(session_id.to_string(), slot.clone());
        Ok(slot)
    }

    pub fn get(&self, session_id: &str) -> Result<ReadingSession, SessionError> {
        Ok(self.slot(session_id)?.lock().expect("session lock").session.clone())
    }

    /// Next question for the session, recording it as served. `qag` must be
    /// the pipeline output for the session's story.
    pub fn next_question(&self, session_id: &str, story: &Story, qag: &QagOutput, top_n: usize) -> Result<NextQuestion, SessionError> {
        let slot = self.slot(session_id)?;
        let mut slot = slot.lock().expect("session lock");
        if slot.session.story_id != story.story_id {
            return Err(SessionError::StoryMismatch { expected: slot.session.story_id.clone(), got: story.story_id.clone() });
        }
        let (next, event) = slot.session.plan_next(story, qag, top_n, Utc::now());
        if let Some(e) = event {
            Self::append(&mut slot, e)?;
        }
        Ok(next)
    }

    /// Judges and records an answer. Repeating an idempotency key returns
    /// the first outcome without recording anything.
    pub fn answer(
        &self,
        session_id: &str,
        question_id: &str,
        user_answer: &str,
        idempotency_key: &str,
        threshold: f64,
    ) -> Result<AnswerOutcome, SessionError> {
        let slot = self.slot(session_id)?;
        let mut slot = slot.lock().expect("session lock");
        let s = &slot.session;
        if let Some(prev) = s.asked.iter().find(|e| e.idempotency_key == idempotency_key) {
            return Ok(AnswerOutcome {
                question_id: prev.question_id.clone(),
                verdict: prev.verdict,
                gold_answer: prev.gold_answer.clone(),
                duplicate: true,
            });
        }
        if !s.is_served(question_id) {
            return Err(SessionError::QuestionNotServed(question_id.to_string()));
        }
        if s.is_answered(question_id) {
            return Err(SessionError::AlreadyAnswered(question_id.to_string()));
        }
        let gold = s.gold.get(question_id).cloned().unwrap_or_default();
        let verdict = judge_answer(user_answer, &gold, threshold).ok_or_else(|| SessionError::UnjudgeableGold(question_id.to_string()))?;
        let event = SessionEvent::Answered {
            question_id: question_id.to_string(),
            user_answer: user_answer.to_string(),
            idempotency_key: idempotency_key.to_string(),
            verdict,
            at: Utc::now(),
        };
        Self::append(&mut slot, event)?;
        Ok(AnswerOutcome { question_id: question_id.to_string(), verdict, gold_answer: gold, duplicate: false })
    }

    pub fn progress(&self, session_id: &str, total_sections: usize) -> Result<ProgressReport, SessionError> {
        let s = self.get(session_id)?;
        Ok(ProgressReport {
            session_id: s.session_id.clone(),
            story_id: s.story_id.clone(),
            current_section: s.current_section,
            total_sections,
            finished: s.current_section as usize > total_sections,
            answered: s.asked.len(),
            correct: s.asked.iter().filter(|e| e.verdict.correct).count(),
            entries: s.asked,
        })
    }
}
