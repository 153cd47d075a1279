//! Ranking of generated QA pairs.
//!
//! Ranking is framed as classification between expert-written pairs
//! (positives) and pipeline-generated pairs (negatives); the positive-class
//! probability is the ranking score. Two rankers ship: a learned logistic
//! model over hashed text features and a weight-free bag-of-words fallback.

mod bow;
mod dataset;
mod logistic;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer_extract::CandidateAnswer;
use crate::corpus::SectionKey;

pub use bow::BagOfWordsRanker;
pub use dataset::{build_ranking_dataset, gold_inputs, generated_inputs, Label, RankingExample, RankingInput};
pub use logistic::{train_ranker, LogisticRanker, RankerHyperparams, RankerMetrics};

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("no examples to train on")]
    Empty,
    #[error("no ground-truth pairs supplied")]
    NoGold,
    #[error("unknown section {0}")]
    UnknownSection(String),
    #[error("empty section, question or answer text in {0}")]
    EmptyField(String),
    #[error("training examples contain a single class")]
    SingleClass,
    #[error("ranker was trained with layout {trained:?} but scored with {requested:?}")]
    LayoutMismatch { trained: RankerInputLayout, requested: RankerInputLayout },
    #[error("invalid layout: separator must be non-empty")]
    BadLayout,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unreadable ranker file {path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutOrder {
    SectionQuestionAnswer,
    SectionAnswer,
}

/// How (section, question, answer) is serialized into one classifier input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankerInputLayout {
    pub order: LayoutOrder,
    pub separator: String,
}

impl Default for RankerInputLayout {
    fn default() -> Self {
        Self { order: LayoutOrder::SectionQuestionAnswer, separator: " [SEP] ".to_string() }
    }
}

impl RankerInputLayout {
    pub fn answer_only() -> Self {
        Self { order: LayoutOrder::SectionAnswer, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RankerError> {
        if self.separator.is_empty() {
            Err(RankerError::BadLayout)
        } else {
            Ok(())
        }
    }

    /// Fields in serialization order, each trimmed.
    pub fn fields<'a>(&self, section: &'a str, question: &'a str, answer: &'a str) -> Vec<&'a str> {
        match self.order {
            LayoutOrder::SectionQuestionAnswer => vec![section.trim(), question.trim(), answer.trim()],
            LayoutOrder::SectionAnswer => vec![section.trim(), answer.trim()],
        }
    }

    pub fn serialize(&self, section: &str, question: &str, answer: &str) -> String {
        self.fields(section, question, answer).join(&self.separator)
    }
}

/// A scoring model. Implementations are immutable once built and safe to
/// share across threads.
pub trait Ranker: Send + Sync {
    fn kind(&self) -> &'static str;

    fn layout(&self) -> &RankerInputLayout;

    /// Score in [0, 1] without the layout check; inputs are already trimmed.
    fn score_fields(&self, section: &str, question: &str, answer: &str) -> f64;

    fn save(&self, dir: &Path) -> Result<(), RankerError>;
}

/// Positive-class score of one pair. Surrounding whitespace is ignored.
pub fn score(
    section: &str,
    question: &str,
    answer: &str,
    ranker: &dyn Ranker,
    layout: &RankerInputLayout,
) -> Result<f64, RankerError> {
    if ranker.layout() != layout {
        return Err(RankerError::LayoutMismatch { trained: ranker.layout().clone(), requested: layout.clone() });
    }
    Ok(ranker.score_fields(section.trim(), question.trim(), answer.trim()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedQAPair {
    pub story_id: String,
    pub section_index: u32,
    pub question: String,
    pub answer: String,
    pub score: f64,
    pub rank_hint: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<CandidateAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_tag: Option<String>,
}

impl RankedQAPair {
    pub fn section_key(&self) -> SectionKey {
        SectionKey::new(&self.story_id, self.section_index)
    }
}

fn ranking_order(a: &RankedQAPair, b: &RankedQAPair) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.rank_hint.cmp(&b.rank_hint))
        .then_with(|| a.question.cmp(&b.question))
}

/// Highest scores first; ties by earlier `rank_hint`, then question text.
/// Duplicate (question, answer) pairs keep only their best-ranked copy.
pub fn select_top_n(candidates: &[RankedQAPair], n: usize) -> Vec<RankedQAPair> {
    let mut sorted: Vec<&RankedQAPair> = candidates.iter().collect();
    sorted.sort_by(|a, b| ranking_order(a, b));
    let mut seen = std::collections::HashSet::new();
    sorted
        .into_iter()
        .filter(|p| seen.insert((p.question.as_str(), p.answer.as_str())))
        .take(n)
        .cloned()
        .collect()
}

const MANIFEST: &str = "ranker.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    layout: RankerInputLayout,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RankerError> {
    let body = serde_json::to_string(value).expect("ranker state serializes");
    fs::write(path, body).map_err(|source| RankerError::Io { path: path.display().to_string(), source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RankerError> {
    let raw = fs::read_to_string(path).map_err(|source| RankerError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&raw).map_err(|e| RankerError::Format { path: path.display().to_string(), message: e.to_string() })
}

pub(crate) fn write_manifest(dir: &Path, kind: &str, layout: &RankerInputLayout) -> Result<(), RankerError> {
    fs::create_dir_all(dir).map_err(|source| RankerError::Io { path: dir.display().to_string(), source })?;
    write_json(&dir.join(MANIFEST), &Manifest { kind: kind.to_string(), layout: layout.clone() })
}

/// Loads a ranker saved with [`Ranker::save`].
pub fn load_ranker(dir: &Path) -> Result<Box<dyn Ranker>, RankerError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    match manifest.kind.as_str() {
        BagOfWordsRanker::KIND => Ok(Box::new(BagOfWordsRanker::with_layout(manifest.layout))),
        LogisticRanker::KIND => Ok(Box::new(LogisticRanker::load(dir, manifest.layout)?)),
        other => Err(RankerError::Format {
            path: dir.join(MANIFEST).display().to_string(),
            message: format!("unknown ranker kind `{other}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(q: &str, score: f64, rank_hint: usize) -> RankedQAPair {
        RankedQAPair {
            story_id: "s".into(),
            section_index: 1,
            question: q.into(),
            answer: "a".into(),
            score,
            rank_hint,
            provenance: None,
            system_tag: None,
        }
    }

    #[test]
    fn tie_break_prefers_earlier_rank_hint() {
        let c = vec![pair("x", 0.9, 5), pair("y", 0.9, 2), pair("z", 0.1, 1)];
        let top = select_top_n(&c, 1);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].rank_hint, 2);
    }

    #[test]
    fn oversized_n_returns_everything_sorted() {
        let c = vec![pair("a", 0.2, 0), pair("b", 0.8, 1), pair("c", 0.5, 2)];
        let top = select_top_n(&c, 10);
        let qs: Vec<_> = top.iter().map(|p| p.question.as_str()).collect();
        assert_eq!(qs, vec!["b", "c", "a"]);
    }

    #[test]
    fn duplicates_keep_best_copy() {
        let c = vec![pair("a", 0.2, 0), pair("a", 0.7, 9), pair("b", 0.5, 1)];
        let top = select_top_n(&c, 3);
        assert_eq!(top.len(), 2);
        assert_eq!((top[0].question.as_str(), top[0].score), ("a", 0.7));
    }

    /// Independent oracle: repeatedly pull the best remaining candidate.
    fn selection_oracle(c: &[RankedQAPair], n: usize) -> Vec<RankedQAPair> {
        let mut pool: Vec<RankedQAPair> = c.to_vec();
        let mut out: Vec<RankedQAPair> = Vec::new();
        while out.len() < n && !pool.is_empty() {
            let mut best = 0;
            for i in 1..pool.len() {
                let (a, b) = (&pool[i], &pool[best]);
                let better = a.score > b.score
                    || (a.score == b.score && a.rank_hint < b.rank_hint)
                    || (a.score == b.score && a.rank_hint == b.rank_hint && a.question < b.question);
                if better {
                    best = i;
                }
            }
            let p = pool.remove(best);
            if !out.iter().any(|o| o.question == p.question && o.answer == p.answer) {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn selection_matches_oracle_and_is_prefix_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c: Vec<RankedQAPair> = (0..100)
                .map(|_| {
                    let mut p = pair(&format!("q{}", rng.gen_range(0..60)), rng.gen_range(0..8) as f64 / 8.0, rng.gen_range(0..30));
                    p.answer = format!("a{}", rng.gen_range(0..2));
                    p
                })
                .collect();
            let n = rng.gen_range(1..40);
            assert_eq!(select_top_n(&c, n), selection_oracle(&c, n));
            let longer = select_top_n(&c, n + 7);
            assert_eq!(&longer[..select_top_n(&c, n).len()], &select_top_n(&c, n)[..]);
        }
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let r = BagOfWordsRanker::new();
        assert!(matches!(
            score("a cow", "what?", "a cow", &r, &RankerInputLayout::answer_only()),
            Err(RankerError::LayoutMismatch { .. })
        ));
        assert!(RankerInputLayout { separator: String::new(), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn serialization_respects_order() {
        let l = RankerInputLayout::default();
        assert_eq!(l.serialize(" s ", "q", "a\n"), "s [SEP] q [SEP] a");
        assert_eq!(RankerInputLayout::answer_only().serialize("s", "q", "a"), "s [SEP] a");
    }
}
