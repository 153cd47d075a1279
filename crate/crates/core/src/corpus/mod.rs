//! Storybook corpus model: stories split into numbered sections, with
//! expert-written QA pairs labelled by narrative element.

mod csv_profile;
mod json_profile;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use json_profile::save_canonical;
pub use stats::{category_distribution, compute_stats, CategoryShare, SplitStats, Summary};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {file}, record {record}: {message}")]
    Parse { file: PathBuf, record: String, message: String },
    #[error("corpus validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("split `{0}` has no stories")]
    EmptySplit(Split),
    #[error("unknown narrative element label `{0}`")]
    UnknownElement(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
}

/// The seven narrative elements QA pairs are labelled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrativeElement {
    Character,
    Setting,
    Feeling,
    Action,
    CausalRelationship,
    OutcomeResolution,
    Prediction,
}

impl NarrativeElement {
    pub const ALL: [NarrativeElement; 7] = [
        Self::Character,
        Self::Setting,
        Self::Feeling,
        Self::Action,
        Self::CausalRelationship,
        Self::OutcomeResolution,
        Self::Prediction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Character => "character",
            Self::Setting => "setting",
            Self::Feeling => "feeling",
            Self::Action => "action",
            Self::CausalRelationship => "causal_relationship",
            Self::OutcomeResolution => "outcome_resolution",
            Self::Prediction => "prediction",
        }
    }
}

impl fmt::Display for NarrativeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NarrativeElement {
    type Err = CorpusError;

    /// Accepts the snake_case names plus the spaced/hyphenated spellings used
    /// in the released CSV files ("causal relationship", "outcome-resolution").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
            .collect();
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == norm)
            .ok_or_else(|| CorpusError::UnknownElement(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(CorpusError::UnknownSplit(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    GroundTruth,
    Generated,
}

/// Identifies one section of one story.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SectionKey {
    pub story_id: String,
    pub section_index: u32,
}

impl SectionKey {
    pub fn new(story_id: impl Into<String>, section_index: u32) -> Self {
        Self { story_id: story_id.into(), section_index }
    }
}

impl fmt::Display for SectionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.story_id, self.section_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub story_id: String,
    pub index: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub pair_id: String,
    pub story_id: String,
    pub section_indices: Vec<u32>,
    pub question: String,
    pub answer: String,
    pub element: NarrativeElement,
    /// Secondary labels carried by some released records; statistics count
    /// only `element`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_elements: Vec<NarrativeElement>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub story_id: String,
    pub title: String,
    pub split: Split,
    pub sections: Vec<Section>,
    pub qa_pairs: Vec<QaPair>,
}

impl Story {
    pub fn section(&self, index: u32) -> Option<&Section> {
        index
            .checked_sub(1)
            .and_then(|i| self.sections.get(i as usize))
            .filter(|s| s.index == index)
    }

    /// Texts of the referenced sections joined by a blank line.
    pub fn joined_sections(&self, indices: &[u32]) -> String {
        indices
            .iter()
            .filter_map(|&i| self.section(i))
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Appends every invariant violation of this story to `out`.
    pub fn collect_violations(&self, out: &mut Vec<String>) {
        let id = &self.story_id;
        if id.trim().is_empty() {
            out.push("story with empty story_id".to_string());
        }
        if self.sections.len() < 2 {
            out.push(format!("story {id}: has {} section(s), at least 2 required", self.sections.len()));
        }
        for (pos, section) in self.sections.iter().enumerate() {
            let expected = pos as u32 + 1;
            if section.index != expected {
                out.push(format!("story {id}: section at position {expected} has index {}", section.index));
            }
            if section.story_id != *id {
                out.push(format!("story {id}: section {} belongs to story {}", section.index, section.story_id));
            }
            if section.text.trim().is_empty() {
                out.push(format!("story {id}: section {} has empty text", section.index));
            }
        }
        let known: BTreeSet<u32> = self.sections.iter().map(|s| s.index).collect();
        let mut seen_ids = BTreeSet::new();
        for pair in &self.qa_pairs {
            let pid = &pair.pair_id;
            if !seen_ids.insert(pid.as_str()) {
                out.push(format!("story {id}: duplicate pair_id {pid}"));
            }
            if pair.story_id != *id {
                out.push(format!("story {id}: pair {pid} belongs to story {}", pair.story_id));
            }
            if pair.question.trim().is_empty() {
                out.push(format!("story {id}: pair {pid} has empty question"));
            }
            if pair.answer.trim().is_empty() {
                out.push(format!("story {id}: pair {pid} has empty answer"));
            }
            if pair.section_indices.is_empty() {
                out.push(format!("story {id}: pair {pid} references no section"));
            }
            for index in &pair.section_indices {
                if !known.contains(index) {
                    out.push(format!("story {id}: pair {pid} references missing section {index}"));
                }
            }
            match (pair.origin, &pair.system_tag) {
                (Origin::GroundTruth, Some(tag)) => {
                    out.push(format!("story {id}: ground-truth pair {pid} carries system_tag {tag}"))
                }
                (Origin::Generated, None) => {
                    out.push(format!("story {id}: generated pair {pid} has no system_tag"))
                }
                _ => {}
            }
        }
    }
}

/// Immutable collection of stories keyed by story id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    stories: BTreeMap<String, Story>,
}

impl Corpus {
    /// Validates every story and reports all violations at once.
    pub fn from_stories(stories: impl IntoIterator<Item = Story>) -> Result<Self, CorpusError> {
        let mut violations = Vec::new();
        let mut map: BTreeMap<String, Story> = BTreeMap::new();
        for story in stories {
            match map.get(&story.story_id) {
                Some(existing) if *existing == story => continue,
                Some(_) => {
                    violations.push(format!("story {}: conflicting duplicate definitions", story.story_id));
                    continue;
                }
                None => {}
            }
            story.collect_violations(&mut violations);
            map.insert(story.story_id.clone(), story);
        }
        if map.is_empty() && violations.is_empty() {
            violations.push("no stories found".to_string());
        }
        if violations.is_empty() {
            Ok(Self { stories: map })
        } else {
            Err(CorpusError::Validation(violations))
        }
    }

    pub fn story(&self, story_id: &str) -> Option<&Story> {
        self.stories.get(story_id)
    }

    pub fn stories(&self) -> impl Iterator<Item = &Story> {
        self.stories.values()
    }

    pub fn stories_in(&self, split: Split) -> impl Iterator<Item = &Story> {
        self.stories.values().filter(move |s| s.split == split)
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }

    pub fn qa_count(&self, split: Split) -> usize {
        self.stories_in(split).map(|s| s.qa_pairs.len()).sum()
    }

    pub fn section(&self, key: &SectionKey) -> Option<&Section> {
        self.story(&key.story_id)?.section(key.section_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatProfile {
    /// `manifest.json` plus one JSON file per story under `stories/`.
    CanonicalJson,
    /// The released dataset layout: `<split>/<book>-story.csv` and
    /// `<split>/<book>-questions.csv`, possibly under intermediate folders.
    CsvPerBook,
}

impl FromStr for FormatProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical_json" | "json" => Ok(Self::CanonicalJson),
            "csv_per_book" | "csv" => Ok(Self::CsvPerBook),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

pub fn load_corpus(root: &Path, profile: FormatProfile) -> Result<Corpus, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root is not a directory"),
        });
    }
    let stories = match profile {
        FormatProfile::CanonicalJson => json_profile::read_stories(root)?,
        FormatProfile::CsvPerBook => csv_profile::read_stories(root)?,
    };
    Corpus::from_stories(stories)
}

/// Reads a single story file in the canonical JSON layout.
pub fn load_story_file(path: &Path) -> Result<Story, CorpusError> {
    let story = json_profile::read_story_file(path)?;
    let mut violations = Vec::new();
    story.collect_violations(&mut violations);
    if violations.is_empty() {
        Ok(story)
    } else {
        Err(CorpusError::Validation(violations))
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn story(id: &str, split: Split, texts: &[&str], pairs: &[(&[u32], NarrativeElement)]) -> Story {
        Story {
            story_id: id.to_string(),
            title: format!("{id} title"),
            split,
            sections: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Section { story_id: id.to_string(), index: i as u32 + 1, text: t.to_string() })
                .collect(),
            qa_pairs: pairs
                .iter()
                .enumerate()
                .map(|(i, (sections, element))| QaPair {
                    pair_id: format!("{id}-q{i}"),
                    story_id: id.to_string(),
                    section_indices: sections.to_vec(),
                    question: format!("question {i}?"),
                    answer: format!("answer {i}"),
                    element: *element,
                    extra_elements: vec![],
                    origin: Origin::GroundTruth,
                    system_tag: None,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::story;
    use super::*;
    use NarrativeElement::*;

    #[test]
    fn element_labels_parse_strictly() {
        assert_eq!("causal relationship".parse::<NarrativeElement>().unwrap(), CausalRelationship);
        assert_eq!("Outcome-Resolution".parse::<NarrativeElement>().unwrap(), OutcomeResolution);
        assert_eq!("prediction".parse::<NarrativeElement>().unwrap(), Prediction);
        assert!("theme".parse::<NarrativeElement>().is_err());
        assert!("".parse::<NarrativeElement>().is_err());
        assert_eq!(NarrativeElement::ALL.len(), 7);
        for e in NarrativeElement::ALL {
            assert_eq!(e.as_str().parse::<NarrativeElement>().unwrap(), e);
        }
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut bad = story("b", Split::Train, &["one", "  "], &[(&[3], Action)]);
        bad.qa_pairs[0].answer.clear();
        bad.qa_pairs[0].system_tag = Some("x".into());
        let err = Corpus::from_stories([bad]).unwrap_err();
        let CorpusError::Validation(v) = err else { panic!("expected validation error") };
        assert_eq!(v.len(), 4, "{v:#?}");
        assert!(v.iter().any(|m| m.contains("empty text")));
        assert!(v.iter().any(|m| m.contains("missing section 3")));
        assert!(v.iter().any(|m| m.contains("empty answer")));
        assert!(v.iter().any(|m| m.contains("system_tag")));
    }

    #[test]
    fn single_section_story_rejected() {
        let err = Corpus::from_stories([story("s", Split::Test, &["only"], &[])]).unwrap_err();
        assert!(err.to_string().contains("at least 2"));
    }

    #[test]
    fn empty_input_is_no_stories_found() {
        let err = Corpus::from_stories(Vec::new()).unwrap_err();
        let CorpusError::Validation(v) = err else { panic!() };
        assert_eq!(v, vec!["no stories found".to_string()]);
    }

    #[test]
    fn duplicates_are_collapsed() {
        let s = story("d", Split::Train, &["a", "b"], &[]);
        let corpus = Corpus::from_stories([s.clone(), s.clone()]).unwrap();
        assert_eq!(corpus.len(), 1);
        let mut other = s.clone();
        other.title = "changed".into();
        assert!(Corpus::from_stories([s, other]).is_err());
    }

    #[test]
    fn section_lookup_by_index() {
        let s = story("d", Split::Train, &["a", "b"], &[]);
        assert_eq!(s.section(2).unwrap().text, "b");
        assert!(s.section(0).is_none());
        assert!(s.section(3).is_none());
        assert_eq!(s.joined_sections(&[1, 2]), "a\n\nb");
    }
}
