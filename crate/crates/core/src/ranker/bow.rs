use std::collections::HashMap;
use std::path::Path;

use super::{write_manifest, LayoutOrder, Ranker, RankerError, RankerInputLayout};
use crate::eval::tokenize_for_rouge;

/// Weight-free ranker: cosine similarity between the token-count vector of
/// question plus answer (answer only under the answer-only layout) and that
/// of the section, using the ROUGE tokenizer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BagOfWordsRanker {
    layout: RankerInputLayout,
}

fn counts(text: &str) -> HashMap<String, f64> {
    let mut m = HashMap::new();
    for t in tokenize_for_rouge(text) {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

/// Cosine of two count vectors; 0 when either is empty.
pub(crate) fn cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

impl BagOfWordsRanker {
    pub const KIND: &'static str = "bag_of_words";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_layout(layout: RankerInputLayout) -> Self {
        Self { layout }
    }
}

impl Ranker for BagOfWordsRanker {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn layout(&self) -> &RankerInputLayout {
        &self.layout
    }

    fn score_fields(&self, section: &str, question: &str, answer: &str) -> f64 {
        let pair = match self.layout.order {
            LayoutOrder::SectionQuestionAnswer => format!("{question} {answer}"),
            LayoutOrder::SectionAnswer => answer.to_string(),
        };
        cosine(&counts(&pair), &counts(section))
    }

    fn save(&self, dir: &Path) -> Result<(), RankerError> {
        write_manifest(dir, Self::KIND, &self.layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::{load_ranker, score};

    #[test]
    fn hand_computed_cosine() {
        // pair {the:1, cow:2, sat:1}, section {the:2, cow:1}:
        // dot = 2 + 2 = 4, |p| = sqrt(6), |s| = sqrt(5)
        let r = BagOfWordsRanker::new();
        let s = score("The cow, the!", "The cow sat?", "cow", &r, &RankerInputLayout::default()).unwrap();
        assert!((s - 4.0 / (6f64.sqrt() * 5f64.sqrt())).abs() < 1e-12);
        assert_eq!(score("abc", "?", "!", &r, &RankerInputLayout::default()).unwrap(), 0.0);
    }

    #[test]
    fn whitespace_and_repetition_do_not_change_scores() {
        let r = BagOfWordsRanker::new();
        let l = RankerInputLayout::default();
        let a = score("Maie sighed.", "Who sighed?", "Maie", &r, &l).unwrap();
        let b = score("Maie sighed.  \n", "Who sighed? ", "Maie\t", &r, &l).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, score("Maie sighed.", "Who sighed?", "Maie", &r, &l).unwrap());
    }

    #[test]
    fn round_trips_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let r = BagOfWordsRanker::with_layout(RankerInputLayout::answer_only());
        r.save(dir.path()).unwrap();
        let loaded = load_ranker(dir.path()).unwrap();
        assert_eq!(loaded.kind(), BagOfWordsRanker::KIND);
        assert_eq!(loaded.layout(), &RankerInputLayout::answer_only());
    }
}
