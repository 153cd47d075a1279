//! Answer-conditioned question generation, answer generation for the
//! question-first baseline, and the seq2seq fine-tuning harness.
//!
//! Backends implement [`QgBackend`]; callers go through [`generate_question`],
//! [`generate_answer`] and [`generate_questions_first`], which validate inputs
//! and normalize output.

mod seq2seq;
mod template;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer_extract::CandidateAnswer;
use crate::corpus::{Corpus, Split};

pub use seq2seq::{finetune, BackendSpec, FinetuneOutcome, LearnedBackend, LossCurve, Seq2SeqSpec};
pub use template::{template_question, TemplateBackend};

/// Separator between the conditioning text and the section in model inputs.
pub const SEP: &str = "<sep>";

#[derive(Debug, Error)]
pub enum QgError {
    #[error("invalid request: {0} is empty")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("generation backend `{backend}` failed: {cause}")]
    Backend { backend: String, cause: String },
    #[error("generation backend `{backend}` produced empty output")]
    EmptyOutput { backend: String },
    #[error("learned backend unavailable: {0}")]
    Unavailable(String),
    #[error("unknown generation backend `{0}`")]
    UnknownBackend(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QgRequest {
    pub section_text: String,
    pub answer_text: String,
    /// The extracted candidate behind `answer_text`, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<CandidateAnswer>,
}

impl QgRequest {
    pub fn new(section_text: impl Into<String>, answer_text: impl Into<String>) -> Self {
        Self { section_text: section_text.into(), answer_text: answer_text.into(), hint: None }
    }

    pub fn from_candidate(section_text: impl Into<String>, candidate: &CandidateAnswer) -> Self {
        Self { section_text: section_text.into(), answer_text: candidate.text.clone(), hint: Some(candidate.clone()) }
    }

    pub fn validate(&self) -> Result<(), QgError> {
        non_empty(&self.section_text, "section_text")?;
        non_empty(&self.answer_text, "answer_text")
    }
}

fn non_empty(s: &str, what: &'static str) -> Result<(), QgError> {
    if s.trim().is_empty() {
        Err(QgError::EmptyInput(what))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub backend_id: String,
    pub max_output_tokens: usize,
    pub decoding: Decoding,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { backend_id: TemplateBackend::ID.to_string(), max_output_tokens: 48, decoding: Decoding::Greedy, seed: 0 }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), QgError> {
        if self.max_output_tokens == 0 {
            return Err(QgError::BadConfig("max_output_tokens must be positive".into()));
        }
        if self.decoding == Decoding::Beam(0) {
            return Err(QgError::BadConfig("beam width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSource {
    FairytaleOnly,
    ExternalOnly,
    /// Concatenation of both datasets.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_source: TrainSource,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { learning_rate: 5e-6, batch_size: 1, epochs: 3, train_source: TrainSource::FairytaleOnly }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<(), QgError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(QgError::BadConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(QgError::BadConfig("batch_size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// A question/answer generator. Implementations must tolerate concurrent
/// calls up to [`QgBackend::max_concurrency`].
pub trait QgBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Upper bound on concurrent calls; `None` means unlimited.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }

    fn question(&self, request: &QgRequest, config: &GenerationConfig) -> Result<String, String>;

    fn answer(&self, section_text: &str, question: &str, config: &GenerationConfig) -> Result<String, String>;

    /// Questions from the section alone, in generation order, at most `limit`.
    fn questions_first(&self, section_text: &str, limit: usize, config: &GenerationConfig) -> Result<Vec<String>, String>;
}

/// Single-line question ending in `?`, at most `max_tokens` words.
pub fn normalize_question(raw: &str, max_tokens: usize) -> Option<String> {
    let words: Vec<&str> = raw.split_whitespace().take(max_tokens).collect();
    let joined = words.join(" ");
    let core = joined.trim_end_matches(|c: char| c == '?' || c == '.' || c == '!' || c == ',' || c.is_whitespace());
    if core.is_empty() {
        None
    } else {
        Some(format!("{core}?"))
    }
}

fn normalize_answer(raw: &str, max_tokens: usize) -> Option<String> {
    let s = raw.split_whitespace().take(max_tokens).collect::<Vec<_>>().join(" ");
    (!s.is_empty()).then_some(s)
}

fn backend_err(backend: &dyn QgBackend) -> impl FnOnce(String) -> QgError + '_ {
    move |cause| QgError::Backend { backend: backend.id().to_string(), cause }
}

pub fn generate_question(request: &QgRequest, backend: &dyn QgBackend, config: &GenerationConfig) -> Result<String, QgError> {
    request.validate()?;
    config.validate()?;
    let raw = backend.question(request, config).map_err(backend_err(backend))?;
    normalize_question(&raw, config.max_output_tokens).ok_or_else(|| QgError::EmptyOutput { backend: backend.id().to_string() })
}

pub fn generate_answer(section_text: &str, question: &str, backend: &dyn QgBackend, config: &GenerationConfig) -> Result<String, QgError> {
    non_empty(section_text, "section_text")?;
    non_empty(question, "question")?;
    config.validate()?;
    let raw = backend.answer(section_text, question, config).map_err(backend_err(backend))?;
    normalize_answer(&raw, config.max_output_tokens).ok_or_else(|| QgError::EmptyOutput { backend: backend.id().to_string() })
}

/// Section-only question generation for the question-first baseline. Empty
/// outputs are dropped; the result has at most `limit` questions.
pub fn generate_questions_first(
    section_text: &str,
    limit: usize,
    backend: &dyn QgBackend,
    config: &GenerationConfig,
) -> Result<Vec<String>, QgError> {
    non_empty(section_text, "section_text")?;
    config.validate()?;
    let raw = backend.questions_first(section_text, limit, config).map_err(backend_err(backend))?;
    Ok(raw.iter().filter_map(|q| normalize_question(q, config.max_output_tokens)).take(limit).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AnswerToQuestion,
    QuestionToAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: String,
    pub target: String,
}

/// Seq2seq pairs from every QA pair of a split: `"<answer> <sep> <section>"`
/// to the question, or the reverse roles for [`Direction::QuestionToAnswer`].
pub fn build_qg_training_pairs(corpus: &Corpus, split: Split, direction: Direction) -> Vec<TrainingPair> {
    corpus
        .stories_in(split)
        .flat_map(|story| {
            story.qa_pairs.iter().map(move |p| {
                let section = story.joined_sections(&p.section_indices);
                let (given, target) = match direction {
                    Direction::AnswerToQuestion => (&p.answer, &p.question),
                    Direction::QuestionToAnswer => (&p.question, &p.answer),
                };
                TrainingPair { input: format!("{given} {SEP} {section}"), target: target.clone() }
            })
        })
        .collect()
}

/// Recovers (section, question, answer) from a training pair.
pub fn split_training_pair(pair: &TrainingPair, direction: Direction) -> Option<(String, String, String)> {
    let (given, section) = pair.input.split_once(&format!(" {SEP} "))?;
    let (question, answer) = match direction {
        Direction::AnswerToQuestion => (pair.target.clone(), given.to_string()),
        Direction::QuestionToAnswer => (given.to_string(), pair.target.clone()),
    };
    Some((section.to_string(), question, answer))
}

/// Training set for `source`: the corpus pairs, the external pairs, or the
/// corpus pairs followed by the external ones.
pub fn assemble_training_pairs(
    source: TrainSource,
    corpus_pairs: Vec<TrainingPair>,
    external_pairs: Option<Vec<TrainingPair>>,
) -> Result<Vec<TrainingPair>, QgError> {
    let need_external = || external_pairs.clone().ok_or_else(|| QgError::BadConfig(format!("{source:?} training needs external pairs")));
    let pairs = match source {
        TrainSource::FairytaleOnly => corpus_pairs,
        TrainSource::ExternalOnly => need_external()?,
        TrainSource::Both => {
            let mut all = corpus_pairs;
            all.extend(need_external()?);
            all
        }
    };
    if pairs.is_empty() {
        return Err(QgError::EmptyInput("training pairs"));
    }
    Ok(pairs)
}

/// Backends keyed by id.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    backends: HashMap<String, Arc<dyn QgBackend>>,
}

impl BackendRegistry {
    /// A registry holding the template backend.
    pub fn with_defaults() -> Self {
        let mut r = Self::default();
        r.register(Arc::new(TemplateBackend::new()));
        r
    }

    pub fn register(&mut self, backend: Arc<dyn QgBackend>) {
        self.backends.insert(backend.id().to_string(), backend);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn QgBackend>, QgError> {
        self.backends.get(id).cloned().ok_or_else(|| QgError::UnknownBackend(id.to_string()))
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.backends.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}
