//! Rouge-L scoring and the MAP@N protocol for comparing QA-generation systems.
//!
//! A generated pair is scored against a gold pair by concatenating question and
//! answer on both sides and taking the Rouge-L *precision* of the generated
//! string (candidate) against the gold string (reference). MAP@N averages, over
//! every gold pair, the best such precision among the first `n` generated pairs
//! of the same section.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SectionKey, Split};
use crate::ranker::RankedQAPair;

/// Cutoffs reported for every system.
pub const DEFAULT_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot concatenate an empty {0}")]
    EmptyInput(&'static str),
    #[error("system `{system}` references unknown section {section}")]
    UnknownSection { system: String, section: SectionKey },
    #[error("cutoff list is empty or contains 0")]
    BadCutoffs,
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}'
        )
}

/// Lowercase, whitespace-split, strip leading/trailing punctuation from each
/// token and drop tokens that become empty. No stemming.
pub fn tokenize_for_rouge(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(is_punct))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeResult {
    pub lcs_length: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeResult {
    /// Builds the ratios from an LCS length and the two sequence lengths.
    pub fn from_counts(lcs_length: usize, candidate_len: usize, reference_len: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        // 2PR/(P+R) reduces to 2L/(|c|+|r|); this form avoids rounding drift.
        let f1 = if lcs_length == 0 {
            0.0
        } else {
            (2 * lcs_length) as f64 / (candidate_len + reference_len) as f64
        };
        Self {
            lcs_length,
            precision: ratio(lcs_length, candidate_len),
            recall: ratio(lcs_length, reference_len),
            f1,
        }
    }
}

/// Length of the longest common subsequence, one-row dynamic programme.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (outer, inner) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    // row[j] holds the previous row until overwritten; `diag` is the
    // previous row's value at j - 1.
    let mut row = vec![0usize; inner.len() + 1];
    for x in outer {
        let mut diag = 0;
        for (j, y) in inner.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { row[j].max(up) };
            diag = up;
        }
    }
    row[inner.len()]
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeResult {
    RougeResult::from_counts(lcs_length(candidate, reference), candidate.len(), reference.len())
}

/// Question first, one space, then the answer.
pub fn qa_concat(question: &str, answer: &str) -> Result<String, EvalError> {
    if question.trim().is_empty() {
        return Err(EvalError::EmptyInput("question"));
    }
    if answer.trim().is_empty() {
        return Err(EvalError::EmptyInput("answer"));
    }
    Ok(format!("{question} {answer}"))
}

/// A question/answer pair reduced to what scoring needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaText {
    pub question: String,
    pub answer: String,
}

impl QaText {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self { question: question.into(), answer: answer.into() }
    }

    fn concat_tokens(&self) -> Vec<String> {
        // Tokenizing the pieces separately equals tokenizing the joined string
        // and tolerates empty fields in prediction files.
        let mut tokens = tokenize_for_rouge(&self.question);
        tokens.extend(tokenize_for_rouge(&self.answer));
        tokens
    }
}

/// Pairs grouped per section; for generated pairs the vector order is the
/// ranking order.
pub type GroupedPairs = BTreeMap<SectionKey, Vec<QaText>>;

/// Gold pairs of one split, each attributed to every section it references.
pub fn group_gold(corpus: &Corpus, split: Split) -> GroupedPairs {
    let mut grouped = GroupedPairs::new();
    for story in corpus.stories_in(split) {
        for section in &story.sections {
            grouped.entry(SectionKey::new(&story.story_id, section.index)).or_default();
        }
        for pair in &story.qa_pairs {
            for &index in &pair.section_indices {
                grouped
                    .entry(SectionKey::new(&story.story_id, index))
                    .or_default()
                    .push(QaText::new(&pair.question, &pair.answer));
            }
        }
    }
    grouped
}

/// Generated pairs grouped by section, keeping their relative order.
pub fn group_generated<'a>(pairs: impl IntoIterator<Item = &'a RankedQAPair>) -> GroupedPairs {
    let mut grouped = GroupedPairs::new();
    for pair in pairs {
        grouped
            .entry(SectionKey::new(&pair.story_id, pair.section_index))
            .or_default()
            .push(QaText::new(&pair.question, &pair.answer));
    }
    grouped
}

struct BestMatch {
    score: f64,
    index: Option<usize>,
}

fn best_match(gold_tokens: &[String], generated_tokens: &[Vec<String>], n: usize) -> BestMatch {
    let mut best = BestMatch { score: 0.0, index: None };
    for (i, tokens) in generated_tokens.iter().take(n).enumerate() {
        let p = rouge_l(tokens, gold_tokens).precision;
        if best.index.is_none() || p > best.score {
            best = BestMatch { score: p, index: Some(i) };
        }
    }
    best
}

/// MAP@N averaged globally over gold pairs. Sections with no gold pairs do not
/// contribute; gold pairs of sections with no generated pairs score 0. Returns
/// 0 when there are no gold pairs at all.
pub fn map_at_n(gold: &GroupedPairs, generated: &GroupedPairs, n: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (key, gold_pairs) in gold {
        if gold_pairs.is_empty() {
            continue;
        }
        let generated_tokens: Vec<Vec<String>> = generated
            .get(key)
            .map(|pairs| pairs.iter().take(n).map(QaText::concat_tokens).collect())
            .unwrap_or_default();
        for g in gold_pairs {
            total += best_match(&g.concat_tokens(), &generated_tokens, n).score;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDiagnostic {
    pub system_tag: String,
    pub section: SectionKey,
    pub gold: QaText,
    pub best_generated: Option<QaText>,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    /// system tag → cutoff → MAP score
    pub systems: BTreeMap<String, BTreeMap<usize, f64>>,
    pub diagnostics: Vec<SectionDiagnostic>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let width = self.systems.keys().map(String::len).max().unwrap_or(6).max(6);
        let _ = write!(out, "{:<width$}", "system");
        for n in &self.cutoffs {
            let _ = write!(out, "  {:>7}", format!("MAP@{n}"));
        }
        out.push('\n');
        for (system, scores) in &self.systems {
            let _ = write!(out, "{system:<width$}");
            for n in &self.cutoffs {
                let _ = write!(out, "  {:>7.3}", scores.get(n).copied().unwrap_or(0.0));
            }
            out.push('\n');
        }
        out
    }
}

/// Scores every system at every cutoff against one gold grouping. Diagnostics
/// record the argmax generated pair per gold pair at the largest cutoff.
pub fn evaluate_systems(
    gold: &GroupedPairs,
    outputs: &BTreeMap<String, GroupedPairs>,
    cutoffs: &[usize],
) -> Result<EvalReport, EvalError> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(EvalError::BadCutoffs);
    }
    let mut sorted_cutoffs = cutoffs.to_vec();
    sorted_cutoffs.sort_unstable();
    sorted_cutoffs.dedup();
    let largest = *sorted_cutoffs.last().expect("non-empty");

    let mut systems = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (system, generated) in outputs {
        if let Some(unknown) = generated.keys().find(|k| !gold.contains_key(*k)) {
            return Err(EvalError::UnknownSection { system: system.clone(), section: unknown.clone() });
        }
        let scores = sorted_cutoffs
            .iter()
            .map(|&n| (n, map_at_n(gold, generated, n)))
            .collect();
        systems.insert(system.clone(), scores);

        for (key, gold_pairs) in gold {
            let candidates = generated.get(key).map(Vec::as_slice).unwrap_or(&[]);
            let candidate_tokens: Vec<Vec<String>> =
                candidates.iter().take(largest).map(QaText::concat_tokens).collect();
            for g in gold_pairs {
                let best = best_match(&g.concat_tokens(), &candidate_tokens, largest);
                diagnostics.push(SectionDiagnostic {
                    system_tag: system.clone(),
                    section: key.clone(),
                    gold: g.clone(),
                    best_generated: best.index.map(|i| candidates[i].clone()),
                    best_score: best.score,
                });
            }
        }
    }
    Ok(EvalReport { cutoffs: sorted_cutoffs, systems, diagnostics })
}
