//! Command-line interface of the `fablegen` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fablegen_core::answer_extract::{extract_candidate_answers, ExtractionLimits};
use fablegen_core::corpus::{
    category_distribution, compute_stats, load_corpus, load_story_file, Corpus, FormatProfile, SectionKey, Split, Story,
};
use fablegen_core::eval::{evaluate_systems, group_generated, group_gold, GroupedPairs};
use fablegen_core::lingann::ReferenceAnnotator;
use fablegen_core::pipeline::{
    export_rating_sheet, run_pipeline, Backends, PipelineConfig, PipelineMode, RatingItem, DEFAULT_JUDGE_THRESHOLD,
};
use fablegen_core::qgen::{
    assemble_training_pairs, build_qg_training_pairs, finetune, BackendSpec, Direction, FinetuneConfig, LearnedBackend,
    QgBackend, Seq2SeqSpec, TrainSource, TrainingPair,
};
use fablegen_core::ranker::{
    build_ranking_dataset, generated_inputs, gold_inputs, load_ranker, score, select_top_n, train_ranker,
    BagOfWordsRanker, RankedQAPair, Ranker, RankerHyperparams, RankerInputLayout,
};
use tracing::{info, warn};

use crate::api::{router, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "fablegen", version, about = "Question-answer generation for children's storybooks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus inspection.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Print the candidate answers of one section.
    Extract(ExtractArgs),
    /// Run a QA-generation pipeline and write RankedQAPair JSONL.
    Run(RunArgs),
    /// Re-score candidate pairs and keep the top N per section.
    Rank(RankArgs),
    /// Score prediction files against the gold pairs of a corpus split.
    Eval(EvalArgs),
    /// Train the logistic ranker.
    TrainRanker(TrainRankerArgs),
    /// Fine-tune the in-process seq2seq question generator.
    TrainQg(TrainQgArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write a shuffled, source-blinded CSV for human rating.
    ExportRatingSheet(ExportArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Per-split statistics and element distribution.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusFormat {
    Json,
    Csv,
}

impl From<CorpusFormat> for FormatProfile {
    fn from(f: CorpusFormat) -> Self {
        match f {
            CorpusFormat::Json => FormatProfile::CanonicalJson,
            CorpusFormat::Csv => FormatProfile::CsvPerBook,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus root directory.
    #[arg(long, default_value = "fixtures/corpus")]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub corpus_format: CorpusFormat,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        load_corpus(&self.corpus, self.corpus_format.into())
            .with_context(|| format!("loading corpus from {}", self.corpus.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Story file in the canonical JSON layout.
    #[arg(long)]
    pub book: PathBuf,
    /// 1-based section index.
    #[arg(long)]
    pub section: u32,
    /// Emit JSON instead of one line per candidate.
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = ExtractionLimits::default().max_candidates_per_section)]
    pub max_candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    ThreeStage,
    TwoStep,
}

impl From<ModeArg> for PipelineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ThreeStage => PipelineMode::ThreeStage,
            ModeArg::TwoStep => PipelineMode::TwoStepBaseline,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Directory of a trained ranker; the bag-of-words ranker otherwise.
    #[arg(long)]
    pub ranker_dir: Option<PathBuf>,
    /// Learned question generator file written by `train-qg`.
    #[arg(long)]
    pub qg_model: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

impl BackendArgs {
    fn build(&self, mode: PipelineMode, top_n: usize) -> Result<(PipelineConfig, Backends)> {
        let mut config = PipelineConfig { mode, top_n, workers: self.workers, ..PipelineConfig::default() };
        let mut backends = Backends::offline();
        if let Some(dir) = &self.ranker_dir {
            let ranker: Arc<dyn Ranker> =
                Arc::from(load_ranker(dir).with_context(|| format!("loading ranker from {}", dir.display()))?);
            config.ranker_id = format!("file:{}", dir.display());
            backends = backends.with_ranker(config.ranker_id.clone(), ranker);
        }
        if let Some(path) = &self.qg_model {
            let model = LearnedBackend::load(path).with_context(|| format!("loading model {}", path.display()))?;
            if model.direction() != Direction::AnswerToQuestion {
                bail!("{} is a question-to-answer model; the pipeline needs answer-to-question", path.display());
            }
            config.generation.backend_id = model.id().to_string();
            backends = backends.with_generator(Arc::new(model));
        }
        config.validate()?;
        Ok((config, backends))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// One story file; mutually exclusive with --split.
    #[arg(long, conflicts_with = "split")]
    pub book: Option<PathBuf>,
    /// Run every story of this split of --corpus.
    #[arg(long)]
    pub split: Option<Split>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "three-stage")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    #[command(flatten)]
    pub backends: BackendArgs,
    /// Output JSONL file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// RankedQAPair JSONL to re-score.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub ranker_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold corpus root.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub corpus_format: CorpusFormat,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Prediction JSONL; repeatable. Systems are keyed by system_tag.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    pub n: Vec<usize>,
    /// JSON report path; a text table is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    SectionQuestionAnswer,
    AnswerOnly,
}

#[derive(Debug, Args)]
pub struct TrainRankerArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "train")]
    pub split: Split,
    /// Generated negatives as RankedQAPair JSONL. When absent, every scored
    /// candidate of a three-stage run over the split is used.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "section-question-answer")]
    pub layout: LayoutArg,
    #[arg(long, default_value_t = RankerHyperparams::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = RankerHyperparams::default().seed)]
    pub seed: u64,
    /// Output directory for the ranker and metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    AnswerToQuestion,
    QuestionToAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainSourceArg {
    FairytaleOnly,
    ExternalOnly,
    Both,
}

#[derive(Debug, Args)]
pub struct TrainQgArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "answer-to-question")]
    pub direction: DirectionArg,
    #[arg(long, default_value_t = FinetuneConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = FinetuneConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = FinetuneConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "fairytale-only")]
    pub train_source: TrainSourceArg,
    /// JSONL of `{"input", "target"}` pairs from another dataset, already in
    /// the direction being trained.
    #[arg(long)]
    pub external_pairs: Option<PathBuf>,
    /// Request an externally served pretrained model instead.
    #[arg(long)]
    pub external_model: Option<String>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session logs are written under <data-dir>/sessions; in memory when absent.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Static UI bundle served for non-API paths.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    #[arg(long, default_value_t = DEFAULT_JUDGE_THRESHOLD)]
    pub judge_threshold: f64,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Prediction JSONL; repeatable. The system is the pair's system_tag.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Key file mapping item ids to systems.
    #[arg(long)]
    pub key: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus { command: CorpusCommand::Stats(a) } => corpus_stats(a),
        Command::Extract(a) => extract(a),
        Command::Run(a) => run_cmd(a),
        Command::Rank(a) => rank(a),
        Command::Eval(a) => eval(a),
        Command::TrainRanker(a) => train_ranker_cmd(a),
        Command::TrainQg(a) => train_qg(a),
        Command::Serve(a) => serve(a),
        Command::ExportRatingSheet(a) => export(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn read_pairs_jsonl(path: &Path) -> Result<Vec<RankedQAPair>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn read_training_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn to_jsonl<'a>(pairs: impl IntoIterator<Item = &'a RankedQAPair>) -> String {
    pairs.into_iter().map(|p| serde_json::to_string(p).expect("pair serializes") + "\n").collect()
}

fn corpus_stats(a: StatsArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let stats = compute_stats(&corpus, a.split)?;
    let categories = category_distribution(&corpus, a.split)?;
    match a.format {
        OutputFormat::Json => {
            let v = serde_json::json!({ "split": a.split, "stats": stats, "categories": categories });
            writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v)?)?;
        }
        OutputFormat::Table => {
            write!(std::io::stdout(), "{}", stats.to_table())?;
            writeln!(std::io::stdout())?;
            for (element, share) in &categories {
                writeln!(std::io::stdout(), "{:<20} {:>5} {:>7.2}%", element.as_str(), share.count, 100.0 * share.fraction)?;
            }
        }
    }
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let story = load_story_file(&a.book)?;
    let section = story
        .section(a.section)
        .with_context(|| format!("{} has no section {}", story.story_id, a.section))?;
    let limits = ExtractionLimits { max_candidates_per_section: a.max_candidates };
    let candidates = extract_candidate_answers(section, &ReferenceAnnotator::new(), limits)?;
    if a.json {
        writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&candidates)?)?;
    } else {
        for c in &candidates {
            let targets: Vec<&str> = c.target_elements.iter().map(|t| t.as_str()).collect();
            writeln!(std::io::stdout(), "{:>3}  {:<40}  {}", c.rank_hint, c.text, targets.join(","))?;
        }
    }
    Ok(())
}

fn stories_for(book: Option<&Path>, split: Option<Split>, corpus: &CorpusArgs) -> Result<Vec<Story>> {
    match (book, split) {
        (Some(path), _) => Ok(vec![load_story_file(path)?]),
        (None, Some(split)) => Ok(corpus.load()?.stories_in(split).cloned().collect()),
        (None, None) => bail!("pass --book <file> or --split <split>"),
    }
}

fn run_cmd(a: RunArgs) -> Result<()> {
    let (config, backends) = a.backends.build(a.mode.into(), a.top_n)?;
    let stories = stories_for(a.book.as_deref(), a.split, &a.corpus)?;
    let mut jsonl = String::new();
    let mut failures = 0usize;
    for story in &stories {
        let out = run_pipeline(story, &config, &backends)?;
        for e in &out.errors {
            warn!(story = %e.story_id, section = e.section_index, stage = ?e.stage, "{}", e.message);
        }
        failures += out.errors.len();
        jsonl.push_str(&out.to_jsonl());
    }
    emit(a.out.as_deref(), &jsonl)?;
    info!(stories = stories.len(), failed_sections = failures, mode = config.mode.as_str(), "run finished");
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    if a.top_n == 0 {
        bail!("--top-n must be at least 1");
    }
    let corpus = a.corpus.load()?;
    let ranker: Box<dyn Ranker> = match &a.ranker_dir {
        Some(dir) => load_ranker(dir)?,
        None => Box::new(BagOfWordsRanker::new()),
    };
    let mut by_section: BTreeMap<SectionKey, Vec<RankedQAPair>> = BTreeMap::new();
    for mut pair in read_pairs_jsonl(&a.input)? {
        let key = pair.section_key();
        let section = corpus.section(&key).with_context(|| format!("unknown section {key}"))?;
        pair.score = score(&section.text, &pair.question, &pair.answer, ranker.as_ref(), ranker.layout())?;
        by_section.entry(key).or_default().push(pair);
    }
    let selected: Vec<RankedQAPair> =
        by_section.values().flat_map(|pairs| select_top_n(pairs, a.top_n)).collect();
    emit(a.out.as_deref(), &to_jsonl(&selected))
}

fn eval(a: EvalArgs) -> Result<()> {
    let corpus = load_corpus(&a.gold, a.corpus_format.into())?;
    let gold = group_gold(&corpus, a.split);
    let mut systems: BTreeMap<String, Vec<RankedQAPair>> = BTreeMap::new();
    for path in &a.pred {
        for pair in read_pairs_jsonl(path)? {
            let tag = pair
                .system_tag
                .clone()
                .with_context(|| format!("{}: pair without system_tag", path.display()))?;
            systems.entry(tag).or_default().push(pair);
        }
    }
    let grouped: BTreeMap<String, GroupedPairs> =
        systems.iter().map(|(tag, pairs)| (tag.clone(), group_generated(pairs))).collect();
    let report = evaluate_systems(&gold, &grouped, &a.n)?;
    write!(std::io::stdout(), "{}", report.to_text_table())?;
    if let Some(out) = &a.out {
        emit(Some(out), &report.to_json())?;
    }
    Ok(())
}

fn train_ranker_cmd(a: TrainRankerArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let negatives: Vec<RankedQAPair> = match &a.negatives {
        Some(path) => read_pairs_jsonl(path)?,
        None => {
            let config = PipelineConfig::default();
            let backends = Backends::offline();
            let mut all = Vec::new();
            for story in corpus.stories_in(a.split) {
                let out = run_pipeline(story, &config, &backends)?;
                all.extend(out.pools.into_values().flatten());
            }
            all
        }
    };
    let gold = gold_inputs(&corpus, a.split);
    let generated = generated_inputs(&corpus, &negatives)?;
    let hp = RankerHyperparams { epochs: a.epochs, seed: a.seed, ..RankerHyperparams::default() };
    let examples = build_ranking_dataset(&gold, &generated, hp.seed)?;
    let layout = match a.layout {
        LayoutArg::SectionQuestionAnswer => RankerInputLayout::default(),
        LayoutArg::AnswerOnly => RankerInputLayout::answer_only(),
    };
    let (ranker, metrics) = train_ranker(&examples, &layout, &hp)?;
    ranker.save(&a.out)?;
    emit(Some(&a.out.join("metrics.json")), &serde_json::to_string_pretty(&metrics)?)?;
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&metrics)?)?;
    Ok(())
}

fn train_qg(a: TrainQgArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let direction = match a.direction {
        DirectionArg::AnswerToQuestion => Direction::AnswerToQuestion,
        DirectionArg::QuestionToAnswer => Direction::QuestionToAnswer,
    };
    let train_source = match a.train_source {
        TrainSourceArg::FairytaleOnly => TrainSource::FairytaleOnly,
        TrainSourceArg::ExternalOnly => TrainSource::ExternalOnly,
        TrainSourceArg::Both => TrainSource::Both,
    };
    let external = a.external_pairs.as_deref().map(read_training_pairs).transpose()?;
    let pairs = assemble_training_pairs(train_source, build_qg_training_pairs(&corpus, a.split, direction), external)?;
    let spec = match a.external_model {
        Some(model) => BackendSpec::External { id: "external".into(), model },
        None => BackendSpec::InProcess(Seq2SeqSpec { direction, ..Seq2SeqSpec::default() }),
    };
    let config = FinetuneConfig { learning_rate: a.lr, epochs: a.epochs, batch_size: a.batch_size, train_source };
    let outcome = finetune(&spec, &pairs, &config, a.metrics.as_deref())?;
    outcome.backend.save(&a.out)?;
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&outcome.loss_curve)?)?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let (pipeline, backends) = a.backends.build(PipelineMode::ThreeStage, a.top_n)?;
    let config = ServiceConfig {
        corpus,
        backends,
        pipeline,
        data_dir: a.data_dir,
        static_dir: a.static_dir,
        judge_threshold: a.judge_threshold,
    };
    let app = router(config)?;
    let addr = format!("{}:{}", a.host, a.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok(())
    })
}

fn export(a: ExportArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let mut items = Vec::new();
    for path in &a.pred {
        for pair in read_pairs_jsonl(path)? {
            let system = pair.system_tag.clone().unwrap_or_else(|| path.display().to_string());
            if corpus.section(&pair.section_key()).is_none() {
                bail!("{}: unknown section {}", path.display(), pair.section_key());
            }
            items.push(RatingItem { system, pair });
        }
    }
    let sheet = export_rating_sheet(&corpus, &items, a.seed);
    emit(Some(&a.out), &sheet.sheet_csv)?;
    emit(Some(&a.key), &sheet.key_csv)?;
    info!(items = items.len(), "rating sheet written");
    Ok(())
}
