//! Word lists shipped with the crate: the part-of-speech lexicon used by the
//! reference tagger and the emotion lexicon used to spot feeling answers.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use super::CoarsePos;

const LEXICON_TSV: &str = include_str!("../../data/lexicon.tsv");
const EMOTIONS_TXT: &str = include_str!("../../data/emotions.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexEntry {
    pub pos: CoarsePos,
    pub lemma: String,
    pub past: bool,
    pub aux: bool,
}

fn parse_pos(s: &str) -> CoarsePos {
    match s {
        "noun" => CoarsePos::Noun,
        "propn" => CoarsePos::Propn,
        "verb" => CoarsePos::Verb,
        "adj" => CoarsePos::Adj,
        "adv" => CoarsePos::Adv,
        "pron" => CoarsePos::Pron,
        "det" => CoarsePos::Det,
        "adp" => CoarsePos::Adp,
        "num" => CoarsePos::Num,
        "punct" => CoarsePos::Punct,
        "other" => CoarsePos::Other,
        other => panic!("lexicon.tsv: unknown part of speech `{other}`"),
    }
}

fn lexicon() -> &'static HashMap<String, LexEntry> {
    static LEXICON: OnceLock<HashMap<String, LexEntry>> = OnceLock::new();
    LEXICON.get_or_init(|| {
        LEXICON_TSV
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|line| {
                let mut cols = line.split('\t');
                let word = cols.next().expect("word column").to_string();
                let pos = parse_pos(cols.next().expect("pos column"));
                let lemma = cols.next().map(str::to_string).unwrap_or_else(|| word.clone());
                let flags = cols.next().unwrap_or("");
                let entry = LexEntry {
                    pos,
                    lemma,
                    past: flags.split(',').any(|f| f == "past"),
                    aux: flags.split(',').any(|f| f == "aux"),
                };
                (word, entry)
            })
            .collect()
    })
}

/// Lexicon entry for a lowercase word.
pub fn lookup(lower: &str) -> Option<&'static LexEntry> {
    lexicon().get(lower)
}

pub fn is_emotion_word(lower: &str) -> bool {
    static EMOTIONS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    EMOTIONS
        .get_or_init(|| {
            EMOTIONS_TXT
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect()
        })
        .contains(lower)
}

/// Function words: closed-class lexicon entries and auxiliaries.
pub fn is_function_word(lower: &str) -> bool {
    lookup(lower).is_some_and(|e| {
        e.aux || matches!(e.pos, CoarsePos::Det | CoarsePos::Pron | CoarsePos::Adp | CoarsePos::Other)
    })
}

/// Whether a verb form is past tense: a lexicon past form, or a regular `-ed`.
pub fn is_past_form(lower: &str) -> bool {
    match lookup(lower) {
        Some(e) => e.past,
        None => lower.len() > 3 && lower.ends_with("ed"),
    }
}

/// Base form of a verb, from the lexicon or by stripping regular inflection.
pub fn verb_lemma(lower: &str) -> String {
    if let Some(e) = lookup(lower).filter(|e| e.pos == CoarsePos::Verb) {
        return e.lemma.clone();
    }
    regular_verb_lemma(lower)
}

pub(crate) fn regular_verb_lemma(lower: &str) -> String {
    if let Some(stem) = lower.strip_suffix("ied") {
        return format!("{stem}y");
    }
    if let Some(stem) = lower.strip_suffix("ing").filter(|s| s.len() >= 2) {
        return undouble(stem);
    }
    if let Some(stem) = lower.strip_suffix("ed").filter(|s| s.len() >= 2) {
        // "sighed" -> "sigh", "loved" -> "love", "stopped" -> "stop"
        if stem.ends_with(|c: char| "aeiou".contains(c)) {
            return stem.to_string();
        }
        let doubled = undouble(stem);
        if doubled != stem {
            return doubled;
        }
        if needs_silent_e(stem) {
            return format!("{stem}e");
        }
        return stem.to_string();
    }
    if let Some(stem) = lower.strip_suffix("ies").filter(|s| s.len() >= 2) {
        return format!("{stem}y");
    }
    if let Some(stem) = lower.strip_suffix("es").filter(|s| ["ch", "sh", "ss", "x", "z", "o"].iter().any(|e| s.ends_with(e))) {
        return stem.to_string();
    }
    if let Some(stem) = lower.strip_suffix('s').filter(|s| s.len() >= 2 && !s.ends_with('s') && !s.ends_with('u')) {
        return stem.to_string();
    }
    lower.to_string()
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'l' | b's' | b'z' | b'f') {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

fn needs_silent_e(stem: &str) -> bool {
    // short consonant-vowel-consonant stems ("hir", "bak") and a few endings
    // English never leaves bare ("lov", "judg", "plung") take an e back
    let b: Vec<char> = stem.chars().collect();
    let vowel = |c: char| "aeiou".contains(c);
    let short_cvc = b.len() == 3 && !vowel(b[2]) && vowel(b[1]) && !vowel(b[0]) && !matches!(b[2], 'w' | 'x' | 'y');
    short_cvc || stem.ends_with('v') || stem.ends_with("dg") || stem.ends_with("ung")
}
