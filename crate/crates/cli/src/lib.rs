//! The `gazeattn` command line: every pipeline stage as a subcommand writing
//! machine-readable files under `--out`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 numeric divergence (including a failed gradient check).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeattn::augment::{
    build_augmented_dataset, read_dataset_jsonl, write_dataset_jsonl, AdjacencyConfig, AugmentConfig, AugmentedDataset,
    MiningOrder, PatternTable,
};
use gazeattn::code::Corpus;
use gazeattn::eval::{
    adjacency_sweep, majority_class_baseline, progress_sweep, LabelFamily, SweepReport, SweepRow, SweepSetup,
};
use gazeattn::gaze::{locality_stats, map_corpus, parse_fixation_csv, write_fixation_csv, FixationRecord, Scanpath};
use gazeattn::model::{
    encode_batch, gradient_check, load_model, save_model, Example, Model, ModelConfig, PassKind, INPUT_VOCAB,
};
use gazeattn::reward::{hard_reward, LabeledSequence, RewardWeights};
use gazeattn::synth::{
    generate_corpus, planted_corpus_scanpaths, scanpath_to_records, synthesize_corpus, PlantedConfig, SynthConfig,
};
use gazeattn::train::{build_examples, evaluate, split_dataset, train, TrainConfig, DEFAULT_CHECKPOINTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "gazeattn",
    version,
    about = "Gaze fixations to attention labels, and a labeler trained on them"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOptions,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Seed for every stochastic step
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map a fixation CSV onto snippet tokens; writes scanpaths.jsonl and locality.csv
    Ingest {
        /// Snippet directory or JSONL file
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        fixations: PathBuf,
    },
    /// Generate synthetic scanpaths; writes fixations.csv and locality.csv
    Synth(SynthArgs),
    /// Build the augmented token set; writes dataset.jsonl and patterns.json
    Augment {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        fixations: PathBuf,
        #[command(flatten)]
        augment: AugmentArgs,
    },
    /// Train the labeler; writes model.bin, history.csv and checkpoints.csv
    Train {
        #[arg(long)]
        snippets: PathBuf,
        /// Directory holding dataset.jsonl and patterns.json
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Label every token of every snippet; writes predictions.jsonl
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        snippets: PathBuf,
    },
    /// Hard reward of predicted labels against gold labels (two JSONL files)
    RewardScore {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        pattern_weight: f64,
        #[arg(long, default_value_t = 0.5)]
        position_weight: f64,
    },
    /// Score a trained model on the held-out split; writes eval.json
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Train fraction used when the model was trained
        #[arg(long, default_value_t = 0.8)]
        split: f64,
    },
    /// Retrain per adjacency window; writes sweep_window.csv
    SweepWindow {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        fixations: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2, 3])]
        windows: Vec<usize>,
        #[arg(long)]
        allow_wide_window: bool,
        #[arg(long, default_value_t = 20)]
        top_k_patterns: usize,
        #[arg(long, default_value_t = 100)]
        pi_cap: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score the held-out split at fractions of training; writes sweep_progress.csv
    SweepProgress {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        fixations: PathBuf,
        #[command(flatten)]
        augment: AugmentArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Finite-difference gradient check on random small batches
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 3)]
        batches: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Snippet directory or JSONL file
    #[arg(long, required_unless_present = "generate", conflicts_with = "generate")]
    pub snippets: Option<PathBuf>,
    /// Generate this many Java snippets instead (also writes snippets.jsonl)
    #[arg(long)]
    pub generate: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub min_lines: usize,
    #[arg(long, default_value_t = 50)]
    pub max_lines: usize,
    /// Probability that a transition stays within --window-lines
    #[arg(long, default_value_t = 0.95)]
    pub locality: f64,
    #[arg(long, default_value_t = 3)]
    pub window_lines: usize,
    #[arg(long, default_value_t = 60)]
    pub fixations_per_snippet: usize,
    /// Use the source-order reader with random skips instead
    #[arg(long)]
    pub planted: bool,
    #[arg(long, default_value_t = 0.35)]
    pub fixation_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub regression_prob: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Scanpath,
    Source,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Adjacency window in lines (0..3)
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Accept windows wider than 3 lines
    #[arg(long)]
    pub allow_wide_window: bool,
    #[arg(long, default_value_t = 20)]
    pub top_k_patterns: usize,
    /// Cap on distinct reading-order indices per snippet
    #[arg(long, default_value_t = 100)]
    pub pi_cap: usize,
    /// Token order used when mining k-grams
    #[arg(long, value_enum, default_value_t = OrderArg::Scanpath)]
    pub mining_order: OrderArg,
}

impl AugmentArgs {
    fn config(&self) -> AugmentConfig {
        augment_config(
            self.window,
            self.allow_wide_window,
            self.top_k_patterns,
            self.pi_cap,
            self.mining_order,
        )
    }
}

fn augment_config(window: usize, allow_wide: bool, top_k: usize, pi_cap: usize, order: OrderArg) -> AugmentConfig {
    AugmentConfig {
        adjacency: AdjacencyConfig {
            window_lines: window,
            allow_wide,
        },
        top_patterns: top_k,
        reading_cap: pi_cap,
        mining_order: match order {
            OrderArg::Scanpath => MiningOrder::Scanpath,
            OrderArg::Source => MiningOrder::Source,
        },
        ..AugmentConfig::default()
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    /// Weight of the reward term
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Cross-entropy batches between reward passes
    #[arg(long, default_value_t = 20)]
    pub reward_every: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Train fraction of the snippet split
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Fractions of training at which the held-out split is scored
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CHECKPOINTS)]
    pub checkpoints: Vec<f64>,
    /// Run the interleaved passes as plain cross-entropy
    #[arg(long)]
    pub ce_only: bool,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            seed,
            alpha: self.alpha,
            reward_every: self.reward_every,
            epochs: self.epochs,
            batch_size: self.batch_size,
            split_ratio: self.split,
            checkpoints: self.checkpoints.clone(),
            reward_weights: RewardWeights::default(),
            reward_term: !self.ce_only,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub ff_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub max_seq_len: usize,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            attention_heads: self.heads,
            attention_layers: self.layers,
            ff_dim: self.ff_dim,
            max_seq_len: self.max_seq_len,
            seed,
            ..ModelConfig::default()
        }
    }
}

/// Bad flag combinations found after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
struct GradientMismatch(f64);

impl std::fmt::Display for GradientMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "gradient check failed: max relative error {:e} >= {GRADCHECK_TOLERANCE:e}",
            self.0
        )
    }
}

impl std::error::Error for GradientMismatch {}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.global.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if e.downcast_ref::<GradientMismatch>().is_some() {
        return 3;
    }
    match e.downcast_ref::<gazeattn::Error>() {
        Some(gazeattn::Error::Config(_)) => 1,
        Some(err) if err.is_divergence() => 3,
        _ => 2,
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| gazeattn::Error::io(path, e))?;
    Ok(BufReader::new(file))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::load(path).with_context(|| format!("loading snippets from {}", path.display()))
}

fn load_scanpaths(corpus: &Corpus, fixations: &Path) -> Result<Vec<Scanpath>> {
    let records = parse_fixation_csv(open(fixations)?).with_context(|| format!("reading {}", fixations.display()))?;
    Ok(map_corpus(corpus, records)?)
}

fn load_dataset(dir: &Path) -> Result<AugmentedDataset> {
    let patterns = PatternTable::read_json(open(&dir.join("patterns.json"))?)?;
    Ok(read_dataset_jsonl(open(&dir.join("dataset.jsonl"))?, patterns)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_report(out: &Path, name: &str, report: &SweepReport) -> Result<()> {
    let mut w = create(out, name)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_locality(out: &Path, scanpaths: &[Scanpath], corpus: &Corpus) -> Result<Option<f64>> {
    match locality_stats(scanpaths, corpus) {
        Ok(report) => {
            let mut w = create(out, "locality.csv")?;
            report.write_csv(&mut w)?;
            w.flush()?;
            Ok(Some(report.fraction(3)))
        }
        Err(e) => {
            log::warn!("no locality report: {e}");
            Ok(None)
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.global.seed;
    let out = cli.global.out.as_path();
    match &cli.command {
        Command::Ingest { snippets, fixations } => ingest(out, snippets, fixations),
        Command::Synth(args) => synth(out, seed, args),
        Command::Augment {
            snippets,
            fixations,
            augment,
        } => {
            let corpus = load_corpus(snippets)?;
            let scanpaths = load_scanpaths(&corpus, fixations)?;
            let dataset = build_augmented_dataset(&corpus, &scanpaths, &augment.config())?;
            let mut w = create(out, "dataset.jsonl")?;
            write_dataset_jsonl(&dataset, &corpus, &mut w)?;
            w.flush()?;
            let mut w = create(out, "patterns.json")?;
            dataset.patterns.write_json(&mut w)?;
            w.flush()?;
            print_json(&serde_json::json!({
                "snippets": dataset.snippets.len(),
                "tokens": dataset.token_count(),
                "patterns": dataset.patterns.len(),
            }))
        }
        Command::Train {
            snippets,
            dataset,
            train: targs,
            model: margs,
        } => {
            let corpus = load_corpus(snippets)?;
            let dataset = load_dataset(dataset)?;
            let examples = build_examples(&corpus, &dataset)?;
            let config = targs.config(seed);
            config.validate()?;
            let (tr, te) = split_dataset(&examples, config.split_ratio, seed)?;
            let mut model = Model::new(margs.config(seed))?;
            let history = train(&mut model, &tr, Some(&te), &config)?;
            fs::create_dir_all(out)?;
            save_model(&model, &out.join("model.bin"))?;
            let mut w = create(out, "history.csv")?;
            history.write_csv(&mut w)?;
            w.flush()?;
            let rows = history
                .checkpoints
                .iter()
                .flat_map(|c| {
                    [
                        SweepRow::new(c.ratio, c.pattern, false),
                        SweepRow::new(c.ratio, c.positional, false),
                    ]
                })
                .collect();
            write_report(out, "checkpoints.csv", &SweepReport::from_rows(rows))?;
            let last = history.passes.last().map(|p| p.total);
            print_json(&serde_json::json!({
                "train_snippets": tr.len(),
                "held_out_snippets": te.len(),
                "passes": history.passes.len(),
                "reward_passes": history.reward_passes().count(),
                "final_loss": last,
            }))
        }
        Command::Predict { model, snippets } => predict(out, model, snippets),
        Command::RewardScore {
            pred,
            gold,
            pattern_weight,
            position_weight,
        } => {
            let weights = RewardWeights {
                pattern: *pattern_weight,
                position: *position_weight,
            };
            weights.validate()?;
            let gold_rows = read_label_rows(gold)?;
            let pred_rows = read_label_rows(pred)?;
            let (p, g) = join_labels(&pred_rows, &gold_rows);
            let score = hard_reward(&p, &g, &weights)?;
            write_json(out, "reward.json", &score)?;
            print_json(&score)
        }
        Command::Eval {
            model,
            snippets,
            dataset,
            split,
        } => {
            let model = load_model(model)?;
            let corpus = load_corpus(snippets)?;
            let dataset = load_dataset(dataset)?;
            let examples = build_examples(&corpus, &dataset)?;
            let (tr, te) = split_dataset(&examples, *split, seed)?;
            let (pattern, positional) = evaluate(&model, &te)?;
            let concat = |xs: &[Example]| {
                let mut s = LabeledSequence::default();
                xs.iter().for_each(|e| s.extend(&e.gold));
                s
            };
            let (trg, teg) = (concat(&tr), concat(&te));
            let report = serde_json::json!({
                "held_out_snippets": te.len(),
                "semantic_pattern": pattern,
                "positional": positional,
                "majority_semantic_pattern": majority_class_baseline(&trg, &teg, LabelFamily::Pattern).ok(),
                "majority_positional": majority_class_baseline(&trg, &teg, LabelFamily::Positional).ok(),
            });
            write_json(out, "eval.json", &report)?;
            print_json(&report)
        }
        Command::SweepWindow {
            snippets,
            fixations,
            windows,
            allow_wide_window,
            top_k_patterns,
            pi_cap,
            train: targs,
            model: margs,
        } => {
            let corpus = load_corpus(snippets)?;
            let scanpaths = load_scanpaths(&corpus, fixations)?;
            let setup = SweepSetup {
                augment: augment_config(3, *allow_wide_window, *top_k_patterns, *pi_cap, OrderArg::Scanpath),
                model: margs.config(seed),
                train: targs.config(seed),
            };
            let report = adjacency_sweep(&corpus, &scanpaths, windows, &setup)?;
            write_report(out, "sweep_window.csv", &report)?;
            report.write_csv(std::io::stdout().lock())?;
            Ok(())
        }
        Command::SweepProgress {
            snippets,
            fixations,
            augment,
            train: targs,
            model: margs,
        } => {
            let corpus = load_corpus(snippets)?;
            let scanpaths = load_scanpaths(&corpus, fixations)?;
            let setup = SweepSetup {
                augment: augment.config(),
                model: margs.config(seed),
                train: targs.config(seed),
            };
            let report = progress_sweep(&corpus, &scanpaths, &setup)?;
            write_report(out, "sweep_progress.csv", &report)?;
            report.write_csv(std::io::stdout().lock())?;
            Ok(())
        }
        Command::Gradcheck { step, batches, alpha } => gradcheck(out, seed, *step, *batches, *alpha),
    }
}

fn ingest(out: &Path, snippets: &Path, fixations: &Path) -> Result<()> {
    let corpus = load_corpus(snippets)?;
    let records = parse_fixation_csv(open(fixations)?).with_context(|| format!("reading {}", fixations.display()))?;
    let total = records.len();
    let scanpaths = map_corpus(&corpus, records)?;
    let mut w = create(out, "scanpaths.jsonl")?;
    for s in &scanpaths {
        serde_json::to_writer(&mut w, s)?;
        writeln!(w)?;
    }
    w.flush()?;
    let fraction = write_locality(out, &scanpaths, &corpus)?;
    print_json(&serde_json::json!({
        "snippets": scanpaths.len(),
        "fixations": total,
        "unmapped": scanpaths.iter().map(|s| s.unmapped_count).sum::<usize>(),
        "locality_window3": fraction,
    }))
}

fn synth(out: &Path, seed: u64, args: &SynthArgs) -> Result<()> {
    let corpus = match (&args.snippets, args.generate) {
        (Some(path), _) => load_corpus(path)?,
        (None, Some(n)) => {
            if args.min_lines > args.max_lines {
                return Err(usage("--min-lines exceeds --max-lines"));
            }
            let corpus = generate_corpus(n, args.min_lines..=args.max_lines, seed);
            let mut w = create(out, "snippets.jsonl")?;
            corpus.write_jsonl(&mut w)?;
            w.flush()?;
            corpus
        }
        (None, None) => return Err(usage("pass --snippets or --generate")),
    };
    let scanpaths = if args.planted {
        planted_corpus_scanpaths(
            &corpus,
            &PlantedConfig {
                fixation_prob: args.fixation_prob,
                regression_prob: args.regression_prob,
                seed,
            },
        )?
    } else {
        let config = SynthConfig {
            locality_prob: args.locality,
            window_lines: args.window_lines,
            fixations_per_snippet: args.fixations_per_snippet,
            seed,
        };
        config.validate()?;
        synthesize_corpus(&corpus, &config)?
    };
    let records: Vec<FixationRecord> = scanpaths
        .iter()
        .flat_map(|s| scanpath_to_records(s, corpus.get(&s.snippet_id).expect("scanpath of a corpus snippet")))
        .collect();
    let mut w = create(out, "fixations.csv")?;
    write_fixation_csv(&records, &mut w)?;
    w.flush()?;
    let fraction = write_locality(out, &scanpaths, &corpus)?;
    print_json(&serde_json::json!({
        "snippets": corpus.len(),
        "fixations": records.len(),
        "locality_window3": fraction,
    }))
}

/// One token's labels, as found in dataset and prediction JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub snippet_id: String,
    pub token_index: usize,
    #[serde(default)]
    pub text: Option<String>,
    pub pattern_label: Option<u32>,
    pub reading_index: Option<usize>,
}

fn read_label_rows(path: &Path) -> Result<Vec<LabelRow>> {
    let mut rows = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| gazeattn::Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabelRow = serde_json::from_str(&line)
            .map_err(|e| gazeattn::Error::Invalid(format!("{} line {}: {e}", path.display(), n + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Aligns predictions to the gold rows by (snippet, token); gold tokens with
/// no prediction count as predicted none.
fn join_labels(pred: &[LabelRow], gold: &[LabelRow]) -> (LabeledSequence, LabeledSequence) {
    let index: std::collections::HashMap<(&str, usize), &LabelRow> = pred
        .iter()
        .map(|r| ((r.snippet_id.as_str(), r.token_index), r))
        .collect();
    let mut p = LabeledSequence::default();
    let mut g = LabeledSequence::default();
    for row in gold {
        let hit = index.get(&(row.snippet_id.as_str(), row.token_index));
        p.pattern.push(hit.and_then(|r| r.pattern_label));
        p.position.push(hit.and_then(|r| r.reading_index));
        g.pattern.push(row.pattern_label);
        g.position.push(row.reading_index);
    }
    (p, g)
}

fn predict(out: &Path, model_path: &Path, snippets: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let corpus = load_corpus(snippets)?;
    let mut w = create(out, "predictions.jsonl")?;
    let mut count = 0;
    for snippet in corpus.iter().filter(|s| !s.is_empty()) {
        let labels = model.predict(&Example::new(snippet, None));
        for (i, token) in snippet.tokens.iter().enumerate().take(labels.len()) {
            let row = LabelRow {
                snippet_id: snippet.id.clone(),
                token_index: token.index,
                text: Some(token.text.clone()),
                pattern_label: labels.pattern[i],
                reading_index: labels.position[i],
            };
            serde_json::to_writer(&mut w, &row)?;
            writeln!(w)?;
            count += 1;
        }
    }
    w.flush()?;
    print_json(&serde_json::json!({ "snippets": corpus.len(), "tokens": count }))
}

fn gradcheck(out: &Path, seed: u64, step: f64, batches: usize, alpha: f64) -> Result<()> {
    if batches == 0 {
        return Err(usage("--batches must be at least 1"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(usage("--step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for b in 0..batches {
        let model = Model::new(ModelConfig {
            embed_dim: 8,
            attention_heads: 2,
            ff_dim: 12,
            max_seq_len: 8,
            seed: seed.wrapping_add(b as u64),
            ..ModelConfig::default()
        })?;
        let examples: Vec<Example> = (0..rng.gen_range(1..=3))
            .map(|i| {
                let len = rng.gen_range(1..=6);
                Example {
                    id: format!("g{i}"),
                    input_ids: (0..len).map(|_| rng.gen_range(1..INPUT_VOCAB)).collect(),
                    gold: LabeledSequence {
                        pattern: (0..len)
                            .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(1..=20)))
                            .collect(),
                        position: (0..len)
                            .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(0..100)))
                            .collect(),
                    },
                }
            })
            .collect();
        let refs: Vec<&Example> = examples.iter().collect();
        let batch = encode_batch(&refs, &model.config)?;
        for kind in [PassKind::CrossEntropy, PassKind::Reward] {
            let report = gradient_check(&model, &batch, kind, alpha, &RewardWeights::default(), step)?;
            checked += report.parameters_checked;
            if report.max_rel_error > worst.0 || worst.1.is_empty() {
                worst = (
                    report.max_rel_error,
                    format!("{} ({})", report.worst_tensor, kind.as_str()),
                );
            }
        }
    }
    let summary = serde_json::json!({
        "max_rel_error": worst.0,
        "worst_tensor": worst.1,
        "parameters_checked": checked,
        "tolerance": GRADCHECK_TOLERANCE,
    });
    write_json(out, "gradcheck.json", &summary)?;
    print_json(&summary)?;
    if worst.0 < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        bail!(GradientMismatch(worst.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, i: usize, p: Option<u32>, q: Option<usize>) -> LabelRow {
        LabelRow {
            snippet_id: id.into(),
            token_index: i,
            text: None,
            pattern_label: p,
            reading_index: q,
        }
    }

    #[test]
    fn join_treats_missing_predictions_as_none() {
        let gold = vec![row("a", 0, Some(1), Some(0)), row("a", 3, Some(2), None)];
        let pred = vec![row("a", 0, Some(1), Some(0)), row("b", 3, Some(2), None)];
        let (p, g) = join_labels(&pred, &gold);
        assert_eq!(p.pattern, vec![Some(1), None]);
        assert_eq!(g.pattern, vec![Some(1), Some(2)]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&usage("x")), 1);
        assert_eq!(exit_code(&gazeattn::Error::Config("x".into()).into()), 1);
        assert_eq!(exit_code(&gazeattn::Error::Divergence("x".into()).into()), 3);
        assert_eq!(exit_code(&gazeattn::Error::Invalid("x".into()).into()), 2);
        let wrapped = anyhow::Error::from(gazeattn::Error::Divergence("x".into())).context("training");
        assert_eq!(exit_code(&wrapped), 3);
        assert_eq!(exit_code(&GradientMismatch(1.0).into()), 3);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
