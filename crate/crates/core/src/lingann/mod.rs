//! Linguistic annotation contract consumed by answer extraction.
//!
//! Offsets are counted in Unicode scalar values. Spans are half-open token
//! ranges. Two backends ship: [`ReferenceAnnotator`], a frozen rule-based
//! tagger that every test and the offline pipeline run on, and
//! [`ProcessAnnotator`], which delegates to an external program (for example a
//! spaCy + SRL script) speaking the same JSON schema.

mod external;
pub mod lexicon;
mod reference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::ProcessAnnotator;
pub use reference::ReferenceAnnotator;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("cannot annotate empty text")]
    EmptyText,
    #[error("annotation backend `{backend}` failed: {cause}")]
    Backend { backend: String, cause: String },
    #[error("annotation backend `{backend}` produced an invalid annotation: {}", .violations.join("; "))]
    Invalid { backend: String, violations: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarsePos {
    Noun,
    Propn,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Punct,
    Other,
}

impl CoarsePos {
    pub fn is_nominal(self) -> bool {
        matches!(self, CoarsePos::Noun | CoarsePos::Propn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lemma: String,
    pub coarse_pos: CoarsePos,
    pub char_start: usize,
    pub char_end: usize,
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx < self.end
    }

    pub fn within(&self, outer: &Span) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityLabel {
    Person,
    Location,
    Time,
    Org,
    Misc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub span: Span,
    pub label: EntityLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounChunk {
    pub span: Span,
    pub head: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentRole {
    Subject,
    Object,
    Modifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub role: ArgumentRole,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateFrame {
    pub trigger: usize,
    /// First token of the verb group the trigger heads ("could not give").
    #[serde(default)]
    pub verb_group_start: Option<usize>,
    pub arguments: Vec<Argument>,
}

impl PredicateFrame {
    pub fn subject(&self) -> Option<&Argument> {
        self.arguments.iter().find(|a| a.role == ArgumentRole::Subject)
    }

    pub fn verb_group(&self) -> Span {
        Span::new(self.verb_group_start.unwrap_or(self.trigger), self.trigger + 1)
    }

    /// Tokens covered by the verb group and every argument.
    pub fn extent(&self) -> Span {
        let group = self.verb_group();
        self.arguments.iter().fold(group, |acc, a| {
            Span::new(acc.start.min(a.span.start), acc.end.max(a.span.end))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotation {
    pub tokens: Vec<Token>,
    pub sentences: Vec<Span>,
    pub entities: Vec<EntityMention>,
    pub chunks: Vec<NounChunk>,
    pub frames: Vec<PredicateFrame>,
}

impl Annotation {
    /// Source text covered by `span`, including inner whitespace and punctuation.
    pub fn surface<'t>(&self, text: &'t str, span: Span) -> &'t str {
        if span.is_empty() || span.end > self.tokens.len() {
            return "";
        }
        let start = self.tokens[span.start].char_start;
        let end = self.tokens[span.end - 1].char_end;
        char_slice(text, start, end)
    }

    pub fn sentence_of(&self, token: usize) -> Option<Span> {
        self.sentences.iter().copied().find(|s| s.contains(token))
    }

    /// Checks every structural invariant against the annotated text.
    pub fn validate(&self, text: &str) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        let n_chars = text.chars().count();
        let mut prev_end = 0usize;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.char_start >= t.char_end {
                v.push(format!("token {i} has empty or inverted offsets"));
                continue;
            }
            if t.char_end > n_chars {
                v.push(format!("token {i} runs past the end of the text"));
                continue;
            }
            if i > 0 && t.char_start < prev_end {
                v.push(format!("token {i} overlaps or precedes token {}", i - 1));
            }
            prev_end = t.char_end;
            if char_slice(text, t.char_start, t.char_end) != t.text {
                v.push(format!("token {i} text {:?} does not match its offsets", t.text));
            }
        }
        let n = self.tokens.len();
        let check_span = |what: String, span: Span, v: &mut Vec<String>| {
            if span.is_empty() || span.end > n {
                v.push(format!("{what} span {}..{} is empty or out of bounds", span.start, span.end));
                return;
            }
            let holders = self.sentences.iter().filter(|s| span.within(s)).count();
            if holders != 1 {
                v.push(format!("{what} span {}..{} lies in {holders} sentences", span.start, span.end));
            }
        };
        for (i, s) in self.sentences.iter().enumerate() {
            if s.is_empty() || s.end > n {
                v.push(format!("sentence {i} is empty or out of bounds"));
            }
            if i > 0 && s.start < self.sentences[i - 1].end {
                v.push(format!("sentence {i} overlaps sentence {}", i - 1));
            }
        }
        for (i, e) in self.entities.iter().enumerate() {
            check_span(format!("entity {i}"), e.span, &mut v);
        }
        for (i, c) in self.chunks.iter().enumerate() {
            check_span(format!("chunk {i}"), c.span, &mut v);
            if !c.span.contains(c.head) {
                v.push(format!("chunk {i} head {} outside its span", c.head));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            match self.tokens.get(f.trigger) {
                Some(t) if t.coarse_pos == CoarsePos::Verb => {}
                _ => v.push(format!("frame {i} trigger {} is not a verb token", f.trigger)),
            }
            if f.verb_group_start.is_some_and(|s| s > f.trigger) {
                v.push(format!("frame {i} verb group starts after its trigger"));
            }
            check_span(format!("frame {i} verb group"), f.verb_group(), &mut v);
            for a in &f.arguments {
                check_span(format!("frame {i} argument"), a.span, &mut v);
                if a.span.contains(f.trigger) {
                    v.push(format!("frame {i} argument {}..{} contains the trigger", a.span.start, a.span.end));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// Substring by character (scalar value) offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}

/// A source of annotations. Implementations must tolerate concurrent calls.
pub trait AnnotationBackend: Send + Sync {
    fn id(&self) -> &str;

    fn annotate_text(&self, text: &str) -> Result<Annotation, String>;
}

/// Annotates `text` and rejects any output that breaks the contract.
pub fn annotate(text: &str, backend: &dyn AnnotationBackend) -> Result<Annotation, AnnotationError> {
    if text.trim().is_empty() {
        return Err(AnnotationError::EmptyText);
    }
    let annotation = backend
        .annotate_text(text)
        .map_err(|cause| AnnotationError::Backend { backend: backend.id().to_string(), cause })?;
    annotation
        .validate(text)
        .map_err(|violations| AnnotationError::Invalid { backend: backend.id().to_string(), violations })?;
    Ok(annotation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_slice_counts_scalars() {
        let s = "caf\u{e9} na\u{ef}ve";
        assert_eq!(char_slice(s, 0, 4), "caf\u{e9}");
        assert_eq!(char_slice(s, 5, 10), "na\u{ef}ve");
        assert_eq!(char_slice(s, 3, 3), "");
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(annotate("", &ReferenceAnnotator::new()), Err(AnnotationError::EmptyText)));
        assert!(matches!(annotate("  \n", &ReferenceAnnotator::new()), Err(AnnotationError::EmptyText)));
    }

    struct Broken;

    impl AnnotationBackend for Broken {
        fn id(&self) -> &str {
            "broken"
        }

        fn annotate_text(&self, text: &str) -> Result<Annotation, String> {
            if text.starts_with('x') {
                return Err("model not loaded".into());
            }
            Ok(Annotation {
                tokens: vec![Token {
                    text: "nope".into(),
                    lemma: "nope".into(),
                    coarse_pos: CoarsePos::Noun,
                    char_start: 0,
                    char_end: 4,
                }],
                sentences: vec![Span::new(0, 1)],
                entities: vec![],
                chunks: vec![NounChunk { span: Span::new(0, 1), head: 3 }],
                frames: vec![PredicateFrame { trigger: 0, verb_group_start: None, arguments: vec![] }],
            })
        }
    }

    #[test]
    fn backend_failures_carry_identity() {
        let err = annotate("xyz", &Broken).unwrap_err();
        assert_eq!(err.to_string(), "annotation backend `broken` failed: model not loaded");
        let AnnotationError::Invalid { backend, violations } = annotate("okay then", &Broken).unwrap_err() else {
            panic!()
        };
        assert_eq!(backend, "broken");
        assert_eq!(violations.len(), 3, "{violations:?}");
    }
}
