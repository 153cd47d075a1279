//! A small attention-based sequence-to-sequence model with hand-written
//! gradients, trained with Adam. It is the in-process learned backend; large
//! pretrained models plug in as external backends.
//!
//! Decoder step `t` forms a query from the previous output token embedding
//! plus a decoder position embedding, attends over input token embeddings
//! (keys add an encoder position embedding), and predicts the next token
//! from the attended context plus the query.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Decoding, Direction, FinetuneConfig, GenerationConfig, QgBackend, QgError, QgRequest, TrainingPair, SEP};

const UNK: usize = 0;
const BOS: usize = 1;
const EOS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqSpec {
    pub id: String,
    pub direction: Direction,
    pub dim: usize,
    pub max_input_tokens: usize,
    pub max_target_tokens: usize,
    pub seed: u64,
}

impl Default for Seq2SeqSpec {
    fn default() -> Self {
        Self {
            id: "seq2seq".into(),
            direction: Direction::AnswerToQuestion,
            dim: 32,
            max_input_tokens: 96,
            max_target_tokens: 32,
            seed: 7,
        }
    }
}

/// What to fine-tune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackendSpec {
    InProcess(Seq2SeqSpec),
    /// A pretrained model served outside this process (path or URL).
    External { id: String, model: String },
}

/// Mean training-set loss before training and after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub initial: f64,
    pub per_epoch: Vec<f64>,
}

impl LossCurve {
    pub fn final_loss(&self) -> f64 {
        self.per_epoch.last().copied().unwrap_or(self.initial)
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        if word == SEP {
            out.push(word.to_string());
            continue;
        }
        let mut cur = String::new();
        for ch in word.chars().flat_map(char::to_lowercase) {
            if ch.is_alphanumeric() || ch == '\'' || ch == '-' {
                cur.push(ch);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn detokenize(tokens: &[&str]) -> String {
    let mut s = String::new();
    for t in tokens {
        let attach = t.chars().all(|c| !c.is_alphanumeric()) && !s.is_empty();
        if !s.is_empty() && !attach {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Params {
    emb: Vec<f32>,
    pos_in: Vec<f32>,
    pos_out: Vec<f32>,
    out_w: Vec<f32>,
    out_b: Vec<f32>,
}

impl Params {
    fn zeros_like(other: &Params) -> Params {
        Params {
            emb: vec![0.0; other.emb.len()],
            pos_in: vec![0.0; other.pos_in.len()],
            pos_out: vec![0.0; other.pos_out.len()],
            out_w: vec![0.0; other.out_w.len()],
            out_b: vec![0.0; other.out_b.len()],
        }
    }

    fn slices_mut(&mut self) -> [&mut Vec<f32>; 5] {
        [&mut self.emb, &mut self.pos_in, &mut self.pos_out, &mut self.out_w, &mut self.out_b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TinySeq2Seq {
    spec: Seq2SeqSpec,
    vocab: Vec<String>,
    params: Params,
}

fn row(m: &[f32], r: usize, d: usize) -> &[f32] {
    &m[r * d..(r + 1) * d]
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_in_place(v: &mut [f32]) {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Cached activations of one decoder step.
struct Step {
    prev: usize,
    query: Vec<f32>,
    attn: Vec<f32>,
    hidden: Vec<f32>,
    probs: Vec<f32>,
}

impl TinySeq2Seq {
    fn new(spec: Seq2SeqSpec, pairs: &[TrainingPair]) -> Self {
        let words: BTreeSet<String> = pairs.iter().flat_map(|p| tokenize(&p.input).into_iter().chain(tokenize(&p.target))).collect();
        let vocab: Vec<String> = ["<unk>", "<bos>", "<eos>"].iter().map(|s| s.to_string()).chain(words).collect();
        let (v, d) = (vocab.len(), spec.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let scale = 1.0 / (d as f32).sqrt();
        let mut init = |n: usize| (0..n).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<f32>>();
        let params = Params {
            emb: init(v * d),
            pos_in: init(spec.max_input_tokens * d),
            pos_out: init((spec.max_target_tokens + 1) * d),
            out_w: init(v * d),
            out_b: vec![0.0; v],
        };
        Self { spec, vocab, params }
    }

    fn encode(&self, text: &str, limit: usize) -> Vec<usize> {
        tokenize(text)
            .iter()
            .take(limit)
            .map(|t| self.vocab.binary_search_by(|w| w[..].cmp(&t[..])).ok().filter(|&i| i > EOS).unwrap_or(UNK))
            .collect()
    }

    /// Input ids, never empty.
    fn encode_input(&self, text: &str) -> Vec<usize> {
        let mut ids = self.encode(text, self.spec.max_input_tokens);
        if ids.is_empty() {
            ids.push(UNK);
        }
        ids
    }

    fn keys(&self, input: &[usize]) -> Vec<f32> {
        let d = self.spec.dim;
        let p = &self.params;
        input
            .iter()
            .enumerate()
            .flat_map(|(j, &x)| row(&p.emb, x, d).iter().zip(row(&p.pos_in, j, d)).map(|(a, b)| a + b).collect::<Vec<_>>())
            .collect()
    }

    fn step(&self, input: &[usize], keys: &[f32], t: usize, prev: usize) -> Step {
        let d = self.spec.dim;
        let p = &self.params;
        let t = t.min(self.spec.max_target_tokens);
        let query: Vec<f32> = row(&p.emb, prev, d).iter().zip(row(&p.pos_out, t, d)).map(|(a, b)| a + b).collect();
        let scale = 1.0 / (d as f32).sqrt();
        let mut attn: Vec<f32> = (0..input.len()).map(|j| dot(&query, row(keys, j, d)) * scale).collect();
        softmax_in_place(&mut attn);
        let mut hidden = query.clone();
        for (j, &x) in input.iter().enumerate() {
            for (h, e) in hidden.iter_mut().zip(row(&p.emb, x, d)) {
                *h += attn[j] * e;
            }
        }
        let mut probs: Vec<f32> = (0..self.vocab.len()).map(|k| dot(row(&p.out_w, k, d), &hidden) + p.out_b[k]).collect();
        softmax_in_place(&mut probs);
        Step { prev, query, attn, hidden, probs }
    }

    fn target_ids(&self, target: &str) -> Vec<usize> {
        let mut ids = self.encode(target, self.spec.max_target_tokens);
        ids.push(EOS);
        ids
    }

    /// Mean per-token negative log-likelihood of one pair; accumulates
    /// gradients into `grad` when given.
    fn loss(&self, input: &[usize], target: &[usize], mut grad: Option<&mut Params>) -> f64 {
        let d = self.spec.dim;
        let p = &self.params;
        let keys = self.keys(input);
        let norm = 1.0 / target.len() as f32;
        let scale = 1.0 / (d as f32).sqrt();
        let mut total = 0.0f64;
        for (t, &y) in target.iter().enumerate() {
            let prev = if t == 0 { BOS } else { target[t - 1] };
            let s = self.step(input, &keys, t, prev);
            total -= f64::from(s.probs[y].max(1e-30)).ln();
            let Some(g) = grad.as_deref_mut() else { continue };

            // logits
            let mut d_hidden = vec![0.0f32; d];
            for k in 0..self.vocab.len() {
                let dz = (s.probs[k] - if k == y { 1.0 } else { 0.0 }) * norm;
                if dz == 0.0 {
                    continue;
                }
                g.out_b[k] += dz;
                let w = row(&p.out_w, k, d);
                for i in 0..d {
                    g.out_w[k * d + i] += dz * s.hidden[i];
                    d_hidden[i] += dz * w[i];
                }
            }
            // hidden = query + sum_j attn_j * emb[x_j]
            let mut d_query = d_hidden.clone();
            let d_attn: Vec<f32> = input.iter().map(|&x| dot(&d_hidden, row(&p.emb, x, d))).collect();
            let mean: f32 = s.attn.iter().zip(&d_attn).map(|(a, da)| a * da).sum();
            for (j, &x) in input.iter().enumerate() {
                let d_score = s.attn[j] * (d_attn[j] - mean) * scale;
                let key = row(&keys, j, d);
                for i in 0..d {
                    d_query[i] += d_score * key[i];
                    let d_key = d_score * s.query[i];
                    g.emb[x * d + i] += d_key + s.attn[j] * d_hidden[i];
                    g.pos_in[j * d + i] += d_key;
                }
            }
            let tp = t.min(self.spec.max_target_tokens);
            for i in 0..d {
                g.emb[s.prev * d + i] += d_query[i];
                g.pos_out[tp * d + i] += d_query[i];
            }
        }
        total / target.len() as f64
    }

    fn decode(&self, input_text: &str, config: &GenerationConfig) -> String {
        let input = self.encode_input(input_text);
        let keys = self.keys(&input);
        let max_len = config.max_output_tokens.min(self.spec.max_target_tokens);
        let width = match config.decoding {
            Decoding::Greedy => 1,
            Decoding::Beam(k) => k.max(1),
        };
        // (tokens, log-prob, finished)
        let mut beams: Vec<(Vec<usize>, f64, bool)> = vec![(Vec::new(), 0.0, false)];
        for t in 0..max_len {
            if beams.iter().all(|b| b.2) {
                break;
            }
            let mut next: Vec<(Vec<usize>, f64, bool)> = Vec::new();
            for (tokens, lp, done) in &beams {
                if *done {
                    next.push((tokens.clone(), *lp, true));
                    continue;
                }
                let prev = tokens.last().copied().unwrap_or(BOS);
                let s = self.step(&input, &keys, t, prev);
                let mut order: Vec<usize> = (0..self.vocab.len()).filter(|&k| k != BOS && k != UNK).collect();
                order.sort_by(|&a, &b| s.probs[b].total_cmp(&s.probs[a]).then(a.cmp(&b)));
                for &k in order.iter().take(width) {
                    let mut extended = tokens.clone();
                    let finished = k == EOS;
                    if !finished {
                        extended.push(k);
                    }
                    next.push((extended, lp + f64::from(s.probs[k].max(1e-30)).ln(), finished));
                }
            }
            next.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            next.truncate(width);
            beams = next;
        }
        let best = &beams[0].0;
        detokenize(&best.iter().map(|&k| self.vocab[k].as_str()).collect::<Vec<_>>())
    }
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        const B1: f32 = 0.9;
        const B2: f32 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let lr = lr as f32;
        let grads = [&grad.emb, &grad.pos_in, &grad.pos_out, &grad.out_w, &grad.out_b];
        for (((p, m), v), g) in params.slices_mut().into_iter().zip(self.m.slices_mut()).zip(self.v.slices_mut()).zip(grads) {
            for i in 0..p.len() {
                if g[i] == 0.0 && m[i] == 0.0 {
                    continue;
                }
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
            }
        }
    }
}

/// A fine-tuned in-process model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedBackend {
    model: TinySeq2Seq,
}

impl LearnedBackend {
    pub fn direction(&self) -> Direction {
        self.model.spec.direction
    }

    pub fn save(&self, path: &Path) -> Result<(), QgError> {
        let body = serde_json::to_string(self).expect("model serializes");
        fs::write(path, body).map_err(|source| QgError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, QgError> {
        let raw = fs::read_to_string(path).map_err(|source| QgError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&raw).map_err(|e| QgError::Unavailable(format!("unreadable model {}: {e}", path.display())))
    }

    /// Mean loss of the model over `pairs`.
    pub fn evaluate(&self, pairs: &[TrainingPair]) -> f64 {
        mean_loss(&self.model, pairs)
    }

    /// Raw decoding of one input string.
    pub fn generate(&self, input: &str, config: &GenerationConfig) -> String {
        self.model.decode(input, config)
    }
}

impl QgBackend for LearnedBackend {
    fn id(&self) -> &str {
        &self.model.spec.id
    }

    fn question(&self, request: &QgRequest, config: &GenerationConfig) -> Result<String, String> {
        if self.direction() != Direction::AnswerToQuestion {
            return Err("model was trained to generate answers, not questions".into());
        }
        Ok(self.generate(&format!("{} {SEP} {}", request.answer_text, request.section_text), config))
    }

    fn answer(&self, section_text: &str, question: &str, config: &GenerationConfig) -> Result<String, String> {
        if self.direction() != Direction::QuestionToAnswer {
            return Err("model was trained to generate questions, not answers".into());
        }
        Ok(self.generate(&format!("{question} {SEP} {section_text}"), config))
    }

    fn questions_first(&self, _section_text: &str, _limit: usize, _config: &GenerationConfig) -> Result<Vec<String>, String> {
        Err("section-only question generation is not supported by this model".into())
    }
}

fn mean_loss(model: &TinySeq2Seq, pairs: &[TrainingPair]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| model.loss(&model.encode_input(&p.input), &model.target_ids(&p.target), None))
        .sum();
    total / pairs.len() as f64
}

pub struct FinetuneOutcome {
    pub backend: LearnedBackend,
    pub loss_curve: LossCurve,
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    backend_id: &'a str,
    spec: &'a BackendSpec,
    config: &'a FinetuneConfig,
    examples: usize,
    vocab_size: usize,
    loss_curve: &'a LossCurve,
}

/// Fine-tunes `spec` on `pairs`. Writes a JSON metrics file when
/// `metrics_path` is given. External specs fail with an explicit
/// unavailability error.
pub fn finetune(
    spec: &BackendSpec,
    pairs: &[TrainingPair],
    config: &FinetuneConfig,
    metrics_path: Option<&Path>,
) -> Result<FinetuneOutcome, QgError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(QgError::EmptyInput("training pairs"));
    }
    let s2s = match spec {
        BackendSpec::InProcess(s) => s,
        BackendSpec::External { id, model } => {
            return Err(QgError::Unavailable(format!("`{id}` needs external model `{model}`, which is not served here")));
        }
    };
    if s2s.dim == 0 || s2s.max_input_tokens == 0 || s2s.max_target_tokens == 0 {
        return Err(QgError::BadConfig("model dimensions must be positive".into()));
    }
    let mut model = TinySeq2Seq::new(s2s.clone(), pairs);
    let encoded: Vec<(Vec<usize>, Vec<usize>)> =
        pairs.iter().map(|p| (model.encode_input(&p.input), model.target_ids(&p.target))).collect();
    let initial = mean_loss(&model, pairs);
    let mut adam = Adam { m: Params::zeros_like(&model.params), v: Params::zeros_like(&model.params), t: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(s2s.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut per_epoch = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grad = Params::zeros_like(&model.params);
            for &i in batch {
                model.loss(&encoded[i].0, &encoded[i].1, Some(&mut grad));
            }
            let inv = 1.0 / batch.len() as f32;
            for g in grad.slices_mut() {
                g.iter_mut().for_each(|x| *x *= inv);
            }
            adam.step(&mut model.params, &grad, config.learning_rate);
        }
        per_epoch.push(mean_loss(&model, pairs));
    }
    let loss_curve = LossCurve { initial, per_epoch };
    if let Some(path) = metrics_path {
        let metrics = RunMetrics {
            backend_id: &s2s.id,
            spec,
            config,
            examples: pairs.len(),
            vocab_size: model.vocab.len(),
            loss_curve: &loss_curve,
        };
        let body = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
        fs::write(path, body).map_err(|source| QgError::Io { path: path.display().to_string(), source })?;
    }
    Ok(FinetuneOutcome { backend: LearnedBackend { model }, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy_pairs() -> Vec<TrainingPair> {
        ["the cow ate grass", "maie sighed", "a junket please", "the fox ran home", "bring us a junket",
         "good mother", "the old mill", "they wanted to eat", "ali baba goes", "to the cave"]
            .iter()
            .map(|s| TrainingPair { input: s.to_string(), target: s.to_string() })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pairs = copy_pairs();
        let spec = Seq2SeqSpec { dim: 6, max_input_tokens: 8, max_target_tokens: 6, ..Default::default() };
        let mut model = TinySeq2Seq::new(spec, &pairs);
        let x = model.encode_input(&pairs[0].input);
        let y = model.target_ids(&pairs[0].target);
        let mut grad = Params::zeros_like(&model.params);
        model.loss(&x, &y, Some(&mut grad));
        let probes: [(usize, usize); 5] = [(0, x[0] * 6 + 1), (1, 2), (2, 4), (3, y[0] * 6 + 3), (4, y[1])];
        for (which, idx) in probes {
            let eps = 1e-2f32;
            let analytic = [&grad.emb, &grad.pos_in, &grad.pos_out, &grad.out_w, &grad.out_b][which][idx];
            let orig = model.params.slices_mut()[which][idx];
            model.params.slices_mut()[which][idx] = orig + eps;
            let up = model.loss(&x, &y, None);
            model.params.slices_mut()[which][idx] = orig - eps;
            let down = model.loss(&x, &y, None);
            model.params.slices_mut()[which][idx] = orig;
            let numeric = (up - down) / (2.0 * f64::from(eps));
            assert!((numeric - f64::from(analytic)).abs() < 2e-3, "param {which}[{idx}]: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let spec = BackendSpec::InProcess(Seq2SeqSpec::default());
        let zero = FinetuneConfig { epochs: 0, ..Default::default() };
        assert!(matches!(finetune(&spec, &copy_pairs(), &zero, None), Err(QgError::BadConfig(_))));
        assert!(matches!(finetune(&spec, &[], &FinetuneConfig::default(), None), Err(QgError::EmptyInput(_))));
        let ext = BackendSpec::External { id: "bart-large".into(), model: "/models/bart".into() };
        let err = finetune(&ext, &copy_pairs(), &FinetuneConfig::default(), None).err().unwrap();
        assert!(err.to_string().starts_with("learned backend unavailable"), "{err}");
    }

    #[test]
    fn trained_model_round_trips_and_decodes_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FinetuneConfig { learning_rate: 0.02, epochs: 2, ..Default::default() };
        let metrics = dir.path().join("metrics.json");
        let out = finetune(&BackendSpec::InProcess(Seq2SeqSpec::default()), &copy_pairs(), &cfg, Some(&metrics)).unwrap();
        assert_eq!(out.loss_curve.per_epoch.len(), 2);
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
        assert_eq!(m["examples"], 10);
        let path = dir.path().join("model.json");
        out.backend.save(&path).unwrap();
        let loaded = LearnedBackend::load(&path).unwrap();
        let g = GenerationConfig::default();
        let a = out.backend.generate("the cow ate grass", &g);
        assert_eq!(a, loaded.generate("the cow ate grass", &g));
        let beam = GenerationConfig { decoding: Decoding::Beam(3), ..Default::default() };
        assert_eq!(loaded.generate("maie sighed", &beam), loaded.generate("maie sighed", &beam));
    }

    #[test]
    fn tokenizer_keeps_separator() {
        assert_eq!(tokenize("Who, me? <sep> Yes."), vec!["who", ",", "me", "?", "<sep>", "yes", "."]);
        assert_eq!(detokenize(&["who", ",", "me", "?"]), "who, me?");
    }
}
