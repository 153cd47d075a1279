use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RankedQAPair, RankerError};
use crate::corpus::{Corpus, SectionKey, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Generated = 0,
    GroundTruth = 1,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::GroundTruth
    }
}

/// One (section, question, answer) triple before labelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingInput {
    pub section_key: SectionKey,
    pub section_text: String,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingExample {
    pub section_key: SectionKey,
    pub section_text: String,
    pub question: String,
    pub answer: String,
    pub label: Label,
}

/// Ground-truth pairs of one split. A pair spanning several sections is
/// keyed by its first section and sees their joined text.
pub fn gold_inputs(corpus: &Corpus, split: Split) -> Vec<RankingInput> {
    corpus
        .stories_in(split)
        .flat_map(|story| {
            story.qa_pairs.iter().map(move |p| RankingInput {
                section_key: SectionKey::new(&story.story_id, p.section_indices.first().copied().unwrap_or(1)),
                section_text: story.joined_sections(&p.section_indices),
                question: p.question.clone(),
                answer: p.answer.clone(),
            })
        })
        .collect()
}

/// Generated pairs joined with their section text.
pub fn generated_inputs(corpus: &Corpus, pairs: &[RankedQAPair]) -> Result<Vec<RankingInput>, RankerError> {
    pairs
        .iter()
        .map(|p| {
            let key = p.section_key();
            let section = corpus.section(&key).ok_or_else(|| RankerError::UnknownSection(key.to_string()))?;
            Ok(RankingInput {
                section_key: key,
                section_text: section.text.clone(),
                question: p.question.clone(),
                answer: p.answer.clone(),
            })
        })
        .collect()
}

/// Every gold pair as a positive and every generated pair as a negative,
/// shuffled deterministically by `seed`.
pub fn build_ranking_dataset(
    gold: &[RankingInput],
    generated: &[RankingInput],
    seed: u64,
) -> Result<Vec<RankingExample>, RankerError> {
    if gold.is_empty() {
        return Err(RankerError::NoGold);
    }
    let labelled = gold
        .iter()
        .map(|i| (i, Label::GroundTruth))
        .chain(generated.iter().map(|i| (i, Label::Generated)));
    let mut out = Vec::with_capacity(gold.len() + generated.len());
    for (input, label) in labelled {
        if [&input.section_text, &input.question, &input.answer].iter().any(|s| s.trim().is_empty()) {
            return Err(RankerError::EmptyField(input.section_key.to_string()));
        }
        out.push(RankingExample {
            section_key: input.section_key.clone(),
            section_text: input.section_text.clone(),
            question: input.question.clone(),
            answer: input.answer.clone(),
            label,
        });
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(q: &str) -> RankingInput {
        RankingInput {
            section_key: SectionKey::new("s", 1),
            section_text: "Once upon a time.".into(),
            question: q.into(),
            answer: "a".into(),
        }
    }

    #[test]
    fn counts_and_labels() {
        let gold: Vec<_> = (0..3).map(|i| input(&format!("g{i}"))).collect();
        let generated: Vec<_> = (0..5).map(|i| input(&format!("x{i}"))).collect();
        let ds = build_ranking_dataset(&gold, &generated, 7).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.iter().filter(|e| e.label.is_positive()).count(), 3);
        assert_eq!(ds, build_ranking_dataset(&gold, &generated, 7).unwrap());
    }

    #[test]
    fn empty_gold_is_an_error() {
        assert!(matches!(build_ranking_dataset(&[], &[input("x")], 1), Err(RankerError::NoGold)));
        assert!(matches!(build_ranking_dataset(&[input(" ")], &[], 1), Err(RankerError::EmptyField(_))));
    }
}
