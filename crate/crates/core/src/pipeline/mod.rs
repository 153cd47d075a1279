//! Pipeline orchestration: the three-stage extract, generate, rank pipeline
//! and the question-first baseline, plus answer judging, reading sessions
//! and rating-sheet export.

mod judge;
mod rating;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer_extract::{extract_candidate_answers, ExtractionLimits};
use crate::corpus::{Section, Story};
use crate::lingann::{AnnotationBackend, ReferenceAnnotator};
use crate::qgen::{
    generate_answer, generate_question, generate_questions_first, BackendRegistry, GenerationConfig, QgBackend, QgRequest,
};
use crate::ranker::{score, select_top_n, BagOfWordsRanker, RankedQAPair, Ranker};

pub use judge::{judge_answer, FeedbackHint, Verdict, DEFAULT_JUDGE_THRESHOLD};
pub use rating::{export_rating_sheet, RatingItem, RatingSheet};
pub use session::{
    AnswerOutcome, AskedEntry, NextQuestion, ProgressReport, ReadingSession, ServedQuestion, SessionError, SessionEvent,
    SessionStore,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("unknown {kind} backend `{id}`")]
    UnknownBackend { kind: &'static str, id: String },
    #[error("cannot build worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    ThreeStage,
    TwoStepBaseline,
}

impl PipelineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::ThreeStage => "three_stage",
            PipelineMode::TwoStepBaseline => "two_step",
        }
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three_stage" => Ok(PipelineMode::ThreeStage),
            "two_step" | "two_step_baseline" => Ok(PipelineMode::TwoStepBaseline),
            other => Err(PipelineError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub top_n: usize,
    pub limits: ExtractionLimits,
    pub generation: GenerationConfig,
    pub ranker_id: String,
    pub annotation_backend_id: String,
    /// Upper bound on sections processed concurrently.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::ThreeStage,
            top_n: 3,
            limits: ExtractionLimits::default(),
            generation: GenerationConfig::default(),
            ranker_id: BagOfWordsRanker::KIND.to_string(),
            annotation_backend_id: ReferenceAnnotator::ID.to_string(),
            workers: 4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.top_n == 0 {
            return Err(PipelineError::Config("top_n must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if self.limits.max_candidates_per_section == 0 {
            return Err(PipelineError::Config("max_candidates_per_section must be at least 1".into()));
        }
        self.generation.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Loaded backends, looked up by the ids a [`PipelineConfig`] names.
#[derive(Clone)]
pub struct Backends {
    pub annotators: HashMap<String, Arc<dyn AnnotationBackend>>,
    pub generators: BackendRegistry,
    pub rankers: HashMap<String, Arc<dyn Ranker>>,
}

impl Backends {
    /// Reference annotator, template generator and bag-of-words ranker.
    pub fn offline() -> Self {
        let mut annotators: HashMap<String, Arc<dyn AnnotationBackend>> = HashMap::new();
        annotators.insert(ReferenceAnnotator::ID.to_string(), Arc::new(ReferenceAnnotator::new()));
        let mut rankers: HashMap<String, Arc<dyn Ranker>> = HashMap::new();
        rankers.insert(BagOfWordsRanker::KIND.to_string(), Arc::new(BagOfWordsRanker::new()));
        Self { annotators, generators: BackendRegistry::with_defaults(), rankers }
    }

    pub fn with_ranker(mut self, id: impl Into<String>, ranker: Arc<dyn Ranker>) -> Self {
        self.rankers.insert(id.into(), ranker);
        self
    }

    pub fn with_generator(mut self, backend: Arc<dyn QgBackend>) -> Self {
        self.generators.register(backend);
        self
    }

    fn resolve(&self, config: &PipelineConfig) -> Result<Resolved, PipelineError> {
        let annotator = self.annotators.get(&config.annotation_backend_id).cloned().ok_or_else(|| {
            PipelineError::UnknownBackend { kind: "annotation", id: config.annotation_backend_id.clone() }
        })?;
        let generator = self
            .generators
            .get(&config.generation.backend_id)
            .map_err(|_| PipelineError::UnknownBackend { kind: "generation", id: config.generation.backend_id.clone() })?;
        let ranker = match config.mode {
            PipelineMode::ThreeStage => Some(
                self.rankers
                    .get(&config.ranker_id)
                    .cloned()
                    .ok_or_else(|| PipelineError::UnknownBackend { kind: "ranker", id: config.ranker_id.clone() })?,
            ),
            PipelineMode::TwoStepBaseline => None,
        };
        Ok(Resolved { annotator, generator, ranker })
    }
}

impl Default for Backends {
    fn default() -> Self {
        Self::offline()
    }
}

struct Resolved {
    annotator: Arc<dyn AnnotationBackend>,
    generator: Arc<dyn QgBackend>,
    ranker: Option<Arc<dyn Ranker>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Generation,
    Ranking,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionError {
    pub story_id: String,
    pub section_index: u32,
    pub stage: Stage,
    pub message: String,
}

/// Result of one pipeline run over a story.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QagOutput {
    /// Selected pairs per section, in rank order.
    pub sections: BTreeMap<u32, Vec<RankedQAPair>>,
    /// Every scored pair per section in rank order, duplicates removed;
    /// `sections` holds a prefix of each list.
    #[serde(skip)]
    pub pools: BTreeMap<u32, Vec<RankedQAPair>>,
    pub errors: Vec<SectionError>,
}

impl QagOutput {
    /// All selected pairs in section then rank order.
    pub fn pairs(&self) -> impl Iterator<Item = &RankedQAPair> {
        self.sections.values().flatten()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.pairs().map(|p| serde_json::to_string(p).expect("pair serializes") + "\n").collect()
    }
}

type SectionResult = Result<Vec<RankedQAPair>, (Stage, String)>;

/// Every candidate of one section with its question and ranker score, in
/// extraction order.
fn score_section(section: &Section, config: &PipelineConfig, r: &Resolved) -> SectionResult {
    let ranker = r.ranker.as_ref().expect("three-stage runs resolve a ranker");
    let candidates = extract_candidate_answers(section, r.annotator.as_ref(), config.limits)
        .map_err(|e| (Stage::Extraction, e.to_string()))?;
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let question = generate_question(&QgRequest::from_candidate(&section.text, &c), r.generator.as_ref(), &config.generation)
            .map_err(|e| (Stage::Generation, e.to_string()))?;
        let s = score(&section.text, &question, &c.text, ranker.as_ref(), ranker.layout())
            .map_err(|e| (Stage::Ranking, e.to_string()))?;
        scored.push(RankedQAPair {
            story_id: section.story_id.clone(),
            section_index: section.index,
            question,
            answer: c.text.clone(),
            score: s,
            rank_hint: c.rank_hint,
            provenance: Some(c),
            system_tag: Some(PipelineMode::ThreeStage.as_str().to_string()),
        });
    }
    Ok(scored)
}

fn two_step_section(section: &Section, config: &PipelineConfig, r: &Resolved) -> SectionResult {
    let g = r.generator.as_ref();
    let questions = generate_questions_first(&section.text, config.top_n, g, &config.generation)
        .map_err(|e| (Stage::Generation, e.to_string()))?;
    questions
        .into_iter()
        .enumerate()
        .map(|(i, question)| {
            let answer = generate_answer(&section.text, &question, g, &config.generation)
                .map_err(|e| (Stage::Generation, e.to_string()))?;
            Ok(RankedQAPair {
                story_id: section.story_id.clone(),
                section_index: section.index,
                question,
                answer,
                score: 1.0,
                rank_hint: i,
                provenance: None,
                system_tag: Some(PipelineMode::TwoStepBaseline.as_str().to_string()),
            })
        })
        .collect()
}

fn worker_count(config: &PipelineConfig, r: &Resolved) -> usize {
    r.generator.max_concurrency().map_or(config.workers, |m| m.max(1).min(config.workers))
}

fn run_sections(story: &Story, config: &PipelineConfig, r: &Resolved, f: fn(&Section, &PipelineConfig, &Resolved) -> SectionResult) -> Result<QagOutput, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config, r))
        .build()
        .map_err(|e| PipelineError::Workers(e.to_string()))?;
    let results: Vec<(u32, SectionResult)> =
        pool.install(|| story.sections.par_iter().map(|s| (s.index, f(s, config, r))).collect());
    let mut out = QagOutput::default();
    for (index, result) in results {
        match result {
            Ok(scored) => {
                let ranked = select_top_n(&scored, scored.len());
                out.sections.insert(index, ranked.iter().take(config.top_n).cloned().collect());
                out.pools.insert(index, ranked);
            }
            Err((stage, message)) => out.errors.push(SectionError {
                story_id: story.story_id.clone(),
                section_index: index,
                stage,
                message,
            }),
        }
    }
    Ok(out)
}

/// Three-stage run: per section, extract candidates, generate a question for
/// each, score with the ranker and keep the top `config.top_n`. A failing
/// section is reported in `errors` and the others proceed.
pub fn run_qag(story: &Story, config: &PipelineConfig, backends: &Backends) -> Result<QagOutput, PipelineError> {
    config.validate()?;
    if config.mode != PipelineMode::ThreeStage {
        return Err(PipelineError::Config("run_qag needs mode three_stage".into()));
    }
    let r = backends.resolve(config)?;
    run_sections(story, config, &r, score_section)
}

/// Scored candidates of one section before selection, in extraction order.
pub fn score_candidates(section: &Section, config: &PipelineConfig, backends: &Backends) -> Result<Vec<RankedQAPair>, PipelineError> {
    let config = PipelineConfig { mode: PipelineMode::ThreeStage, ..config.clone() };
    let r = backends.resolve(&config)?;
    score_section(section, &config, &r).map_err(|(stage, message)| PipelineError::Config(format!("{stage:?}: {message}")))
}

/// Question-first baseline: up to `config.top_n` questions per section in
/// generation order, each answered in a second pass; no ranking.
pub fn run_two_step(story: &Story, config: &PipelineConfig, backends: &Backends) -> Result<QagOutput, PipelineError> {
    config.validate()?;
    if config.mode != PipelineMode::TwoStepBaseline {
        return Err(PipelineError::Config("run_two_step needs mode two_step_baseline".into()));
    }
    let r = backends.resolve(config)?;
    run_sections(story, config, &r, two_step_section)
}

/// Dispatches on `config.mode`.
pub fn run_pipeline(story: &Story, config: &PipelineConfig, backends: &Backends) -> Result<QagOutput, PipelineError> {
    match config.mode {
        PipelineMode::ThreeStage => run_qag(story, config, backends),
        PipelineMode::TwoStepBaseline => run_two_step(story, config, backends),
    }
}
