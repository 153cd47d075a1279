use serde::{Deserialize, Serialize};

use crate::eval::{rouge_l, tokenize_for_rouge};

pub const DEFAULT_JUDGE_THRESHOLD: f64 = 0.5;
const MISS_BELOW: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackHint {
    Exact,
    Partial,
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    /// Rouge-L F1 between the user answer and the gold answer.
    pub similarity: f64,
    pub feedback_hint: FeedbackHint,
}

/// Rouge-L F1 of the user answer against the gold answer; correct at or
/// above `threshold`, exact at 1, a miss below 0.2. An empty or
/// punctuation-only user answer is a miss. Returns `None` when the gold
/// answer has no tokens.
pub fn judge_answer(user_answer: &str, gold_answer: &str, threshold: f64) -> Option<Verdict> {
    let gold = tokenize_for_rouge(gold_answer);
    if gold.is_empty() {
        return None;
    }
    let user = tokenize_for_rouge(user_answer);
    let similarity = if user.is_empty() { 0.0 } else { rouge_l(&user, &gold).f1 };
    let feedback_hint = if similarity >= 1.0 {
        FeedbackHint::Exact
    } else if similarity < MISS_BELOW {
        FeedbackHint::Miss
    } else {
        FeedbackHint::Partial
    };
    Some(Verdict { correct: similarity >= threshold, similarity, feedback_hint })
}
