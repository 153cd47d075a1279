use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_json, write_json, write_manifest, RankerError, RankerInputLayout, RankingExample};
use super::{LayoutOrder, Ranker};
use crate::corpus::SectionKey;
use crate::eval::tokenize_for_rouge;

const WEIGHTS: &str = "weights.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerHyperparams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Feature space has `2^feature_bits` slots.
    pub feature_bits: u32,
    /// Fraction of sections held out for metrics.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for RankerHyperparams {
    fn default() -> Self {
        Self { epochs: 10, learning_rate: 0.2, l2: 1e-6, feature_bits: 18, holdout_fraction: 0.1, seed: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub evaluated_examples: usize,
    pub held_out_sections: usize,
    /// Set when too few sections exist to hold any out; metrics then
    /// describe the training data.
    pub on_training_data: bool,
}

impl RankerMetrics {
    fn from_predictions(pairs: &[(bool, bool)], held_out_sections: usize, on_training_data: bool) -> Self {
        let tp = pairs.iter().filter(|&&(p, g)| p && g).count() as f64;
        let fp = pairs.iter().filter(|&&(p, g)| p && !g).count() as f64;
        let fn_ = pairs.iter().filter(|&&(p, g)| !p && g).count() as f64;
        let correct = pairs.iter().filter(|&&(p, g)| p == g).count() as f64;
        let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            accuracy: ratio(correct, pairs.len() as f64),
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
            evaluated_examples: pairs.len(),
            held_out_sections,
            on_training_data,
        }
    }
}

/// Logistic regression over hashed, field-tagged unigram and bigram
/// features plus token-overlap features between the pair and its section.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRanker {
    layout: RankerInputLayout,
    bits: u32,
    bias: f32,
    weights: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    feature_bits: u32,
    bias: f32,
    /// Non-zero weights as (slot, value).
    weights: Vec<(u32, f32)>,
}

fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        for b in p.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

type Features = Vec<(u32, f32)>;

fn featurize(layout: &RankerInputLayout, bits: u32, section: &str, question: &str, answer: &str) -> Features {
    let mask = (1u64 << bits) - 1;
    let mut acc: HashMap<u32, f32> = HashMap::new();
    let mut add = |parts: &[&str], value: f32| {
        *acc.entry((fnv1a(parts) & mask) as u32).or_insert(0.0) += value;
    };
    let fields = layout.fields(section, question, answer);
    let tokens: Vec<Vec<String>> = fields.iter().map(|f| tokenize_for_rouge(f)).collect();
    for (f, toks) in tokens.iter().enumerate() {
        if toks.is_empty() {
            continue;
        }
        let tag = f.to_string();
        let norm = 1.0 / (toks.len() as f32).sqrt();
        for t in toks {
            add(&[&tag, "u", t], norm);
        }
        for w in toks.windows(2) {
            add(&[&tag, "b", &w[0], &w[1]], norm);
        }
        let bucket = match toks.len() {
            0..=2 => "short",
            3..=6 => "mid",
            7..=15 => "long",
            _ => "xlong",
        };
        add(&[&tag, "len", bucket], 1.0);
    }
    let section_vocab: HashSet<&str> = tokens[0].iter().map(String::as_str).collect();
    for (f, toks) in tokens.iter().enumerate().skip(1) {
        if toks.is_empty() {
            continue;
        }
        let inside = toks.iter().filter(|t| section_vocab.contains(t.as_str())).count();
        add(&[&f.to_string(), "overlap"], inside as f32 / toks.len() as f32);
    }
    if layout.order == LayoutOrder::SectionQuestionAnswer {
        let q: HashSet<&str> = tokens[1].iter().map(String::as_str).collect();
        let shared = tokens[2].iter().filter(|t| q.contains(t.as_str())).count();
        add(&["qa", "shared"], shared as f32 / tokens[2].len().max(1) as f32);
    }
    let mut out: Features = acc.into_iter().collect();
    out.sort_unstable_by_key(|&(k, _)| k);
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticRanker {
    pub const KIND: &'static str = "logistic";

    fn logit(&self, features: &Features) -> f64 {
        f64::from(self.bias) + features.iter().map(|&(k, v)| f64::from(self.weights[k as usize] * v)).sum::<f64>()
    }

    fn features(&self, section: &str, question: &str, answer: &str) -> Features {
        featurize(&self.layout, self.bits, section, question, answer)
    }

    pub(crate) fn load(dir: &Path, layout: RankerInputLayout) -> Result<Self, RankerError> {
        let path = dir.join(WEIGHTS);
        let file: WeightsFile = read_json(&path)?;
        if !(1..=28).contains(&file.feature_bits) {
            return Err(RankerError::Format { path: path.display().to_string(), message: "feature_bits out of range".into() });
        }
        let mut weights = vec![0.0f32; 1 << file.feature_bits];
        for (k, w) in file.weights {
            let slot = weights
                .get_mut(k as usize)
                .ok_or_else(|| RankerError::Format { path: path.display().to_string(), message: format!("slot {k} out of range") })?;
            *slot = w;
        }
        Ok(Self { layout, bits: file.feature_bits, bias: file.bias, weights })
    }
}

impl Ranker for LogisticRanker {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn layout(&self) -> &RankerInputLayout {
        &self.layout
    }

    fn score_fields(&self, section: &str, question: &str, answer: &str) -> f64 {
        sigmoid(self.logit(&self.features(section, question, answer)))
    }

    fn save(&self, dir: &Path) -> Result<(), RankerError> {
        write_manifest(dir, Self::KIND, &self.layout)?;
        let weights = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, &w)| (k as u32, w))
            .collect();
        write_json(&dir.join(WEIGHTS), &WeightsFile { feature_bits: self.bits, bias: self.bias, weights })
    }
}

/// Trains on all but a held-out share of sections and reports metrics on
/// the held-out share at a 0.5 threshold.
pub fn train_ranker(
    examples: &[RankingExample],
    layout: &RankerInputLayout,
    hp: &RankerHyperparams,
) -> Result<(LogisticRanker, RankerMetrics), RankerError> {
    layout.validate()?;
    if examples.is_empty() {
        return Err(RankerError::Empty);
    }
    let positives = examples.iter().filter(|e| e.label.is_positive()).count();
    if positives == 0 || positives == examples.len() {
        return Err(RankerError::SingleClass);
    }
    let bits = hp.feature_bits.clamp(1, 28);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);

    let mut sections: Vec<&SectionKey> =
        examples.iter().map(|e| &e.section_key).collect::<BTreeSet<_>>().into_iter().collect();
    sections.shuffle(&mut rng);
    let n_held = if sections.len() < 2 {
        0
    } else {
        ((sections.len() as f64 * hp.holdout_fraction).ceil() as usize).clamp(1, sections.len() - 1)
    };
    let held: HashSet<&SectionKey> = sections[..n_held].iter().copied().collect();

    let encoded: Vec<(Features, bool, bool)> = examples
        .iter()
        .map(|e| {
            let f = featurize(layout, bits, e.section_text.trim(), e.question.trim(), e.answer.trim());
            (f, e.label.is_positive(), held.contains(&e.section_key))
        })
        .collect();
    let mut train: Vec<usize> = (0..encoded.len()).filter(|&i| !encoded[i].2).collect();

    let mut model = LogisticRanker { layout: layout.clone(), bits, bias: 0.0, weights: vec![0.0; 1 << bits] };
    for epoch in 0..hp.epochs {
        train.shuffle(&mut rng);
        let lr = hp.learning_rate / (1.0 + epoch as f64).sqrt();
        for &i in &train {
            let (features, y, _) = &encoded[i];
            let grad = sigmoid(model.logit(features)) - if *y { 1.0 } else { 0.0 };
            model.bias -= (lr * grad) as f32;
            for &(k, v) in features {
                let w = &mut model.weights[k as usize];
                *w -= (lr * (grad * f64::from(v) + hp.l2 * f64::from(*w))) as f32;
            }
        }
    }

    let evaluate = |held_out: bool| -> Vec<(bool, bool)> {
        encoded
            .iter()
            .filter(|e| e.2 == held_out)
            .map(|(f, y, _)| (sigmoid(model.logit(f)) >= 0.5, *y))
            .collect()
    };
    let metrics = if n_held == 0 {
        RankerMetrics::from_predictions(&evaluate(false), 0, true)
    } else {
        RankerMetrics::from_predictions(&evaluate(true), n_held, false)
    };
    Ok((model, metrics))
}
