use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, NarrativeElement, Split};
use crate::eval::tokenize_for_rouge;

/// Mean, population standard deviation, min and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[usize]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<usize>() as f64 / n;
        let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            sd: var.sqrt(),
            min: *values.iter().min()? as f64,
            max: *values.iter().max()? as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub book_count: usize,
    pub qa_count: usize,
    pub sections_per_story: Summary,
    pub tokens_per_story: Summary,
    pub tokens_per_section: Summary,
    pub questions_per_story: Summary,
    pub questions_per_section: Summary,
    pub tokens_per_question: Summary,
    pub tokens_per_answer: Summary,
}

impl SplitStats {
    pub fn rows(&self) -> [(&'static str, Summary); 7] {
        [
            ("sections per story", self.sections_per_story),
            ("tokens per story", self.tokens_per_story),
            ("tokens per section", self.tokens_per_section),
            ("questions per story", self.questions_per_story),
            ("questions per section", self.questions_per_section),
            ("tokens per question", self.tokens_per_question),
            ("tokens per answer", self.tokens_per_answer),
        ]
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{} split: {} books, {} QA pairs\n{:<22} {:>9} {:>9} {:>7} {:>7}\n",
            self.split, self.book_count, self.qa_count, "", "mean", "sd", "min", "max"
        );
        for (name, s) in self.rows() {
            out.push_str(&format!("{name:<22} {:>9.1} {:>9.1} {:>7} {:>7}\n", s.mean, s.sd, s.min, s.max));
        }
        out
    }
}

/// Table statistics for one split. Token counts use the Rouge tokenizer; a
/// pair referencing several sections counts toward each of them.
pub fn compute_stats(corpus: &Corpus, split: Split) -> Result<SplitStats, CorpusError> {
    let stories: Vec<_> = corpus.stories_in(split).collect();
    if stories.is_empty() {
        return Err(CorpusError::EmptySplit(split));
    }
    let mut sections_per_story = Vec::new();
    let mut tokens_per_story = Vec::new();
    let mut tokens_per_section = Vec::new();
    let mut questions_per_story = Vec::new();
    let mut questions_per_section = Vec::new();
    let mut tokens_per_question = Vec::new();
    let mut tokens_per_answer = Vec::new();

    for story in &stories {
        sections_per_story.push(story.sections.len());
        let section_tokens: Vec<usize> = story.sections.iter().map(|s| tokenize_for_rouge(&s.text).len()).collect();
        tokens_per_story.push(section_tokens.iter().sum());
        tokens_per_section.extend(&section_tokens);
        questions_per_story.push(story.qa_pairs.len());

        let mut per_section: BTreeMap<u32, usize> = story.sections.iter().map(|s| (s.index, 0)).collect();
        for pair in &story.qa_pairs {
            for index in &pair.section_indices {
                *per_section.entry(*index).or_default() += 1;
            }
            tokens_per_question.push(tokenize_for_rouge(&pair.question).len());
            tokens_per_answer.push(tokenize_for_rouge(&pair.answer).len());
        }
        questions_per_section.extend(per_section.values());
    }

    let zero = Summary { mean: 0.0, sd: 0.0, min: 0.0, max: 0.0 };
    let summarize = |v: &[usize]| Summary::of(v).unwrap_or(zero);
    Ok(SplitStats {
        split,
        book_count: stories.len(),
        qa_count: questions_per_story.iter().sum(),
        sections_per_story: summarize(&sections_per_story),
        tokens_per_story: summarize(&tokens_per_story),
        tokens_per_section: summarize(&tokens_per_section),
        questions_per_story: summarize(&questions_per_story),
        questions_per_section: summarize(&questions_per_section),
        tokens_per_question: summarize(&tokens_per_question),
        tokens_per_answer: summarize(&tokens_per_answer),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub count: usize,
    pub fraction: f64,
}

/// Count and share of QA pairs per narrative element (primary label only).
/// All seven elements are always present.
pub fn category_distribution(
    corpus: &Corpus,
    split: Split,
) -> Result<BTreeMap<NarrativeElement, CategoryShare>, CorpusError> {
    if corpus.stories_in(split).next().is_none() {
        return Err(CorpusError::EmptySplit(split));
    }
    let mut counts: BTreeMap<NarrativeElement, usize> = NarrativeElement::ALL.iter().map(|e| (*e, 0)).collect();
    for story in corpus.stories_in(split) {
        for pair in &story.qa_pairs {
            *counts.entry(pair.element).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(e, count)| {
            let fraction = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            (e, CategoryShare { count, fraction })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::test_support::story;
    use super::*;
    use NarrativeElement::*;

    #[test]
    fn one_story_distribution_has_zero_sd() {
        let s = story(
            "solo",
            Split::Test,
            &["a b", "c d e", "f", "g h"],
            &[(&[1], Action), (&[2], Action), (&[3], Feeling), (&[4], Setting)],
        );
        let corpus = Corpus::from_stories([s]).unwrap();
        let stats = compute_stats(&corpus, Split::Test).unwrap();
        assert_eq!(stats.sections_per_story, Summary { mean: 4.0, sd: 0.0, min: 4.0, max: 4.0 });
        assert_eq!(stats.questions_per_story, Summary { mean: 4.0, sd: 0.0, min: 4.0, max: 4.0 });
        assert_eq!(stats.tokens_per_story.mean, 8.0);
        assert_eq!(stats.qa_count, 4);
    }

    #[test]
    fn sections_without_questions_count_as_zero() {
        let s = story("z", Split::Train, &["a", "b", "c"], &[(&[1, 3], Action), (&[1], Character)]);
        let corpus = Corpus::from_stories([s]).unwrap();
        let stats = compute_stats(&corpus, Split::Train).unwrap();
        // per-section counts 2, 0, 1
        assert_eq!(stats.questions_per_section.min, 0.0);
        assert_eq!(stats.questions_per_section.max, 2.0);
        assert_eq!(stats.questions_per_section.mean, 1.0);
    }

    #[test]
    fn empty_split_errors() {
        let corpus = Corpus::from_stories([story("z", Split::Train, &["a", "b"], &[])]).unwrap();
        assert!(matches!(compute_stats(&corpus, Split::Test), Err(CorpusError::EmptySplit(Split::Test))));
        assert!(category_distribution(&corpus, Split::Test).is_err());
    }

    #[test]
    fn distribution_includes_absent_categories() {
        let corpus =
            Corpus::from_stories([story("z", Split::Train, &["a", "b"], &[(&[1], Action), (&[2], Action), (&[2], Feeling)])])
                .unwrap();
        let dist = category_distribution(&corpus, Split::Train).unwrap();
        assert_eq!(dist.len(), 7);
        assert_eq!(dist[&Prediction], CategoryShare { count: 0, fraction: 0.0 });
        assert_eq!(dist[&Action].count, 2);
        let total: f64 = dist.values().map(|c| c.fraction).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn population_sd() {
        let s = Summary::of(&[2, 4, 4, 4, 5, 5, 7, 9]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.sd, 2.0);
    }
}
