//! The `bindecomp` command line: one subcommand per pipeline phase, with
//! plain-text artifacts between phases.
//!
//! Every run writes `<out>.manifest.json` recording the resolved
//! configuration, the seed and SHA-256 digests of inputs and outputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
//!
//! From a raw tree to a report:
//!
//! ```text
//! bindecomp ingest           --in raw/                      --out work/corpus.jsonl
//! bindecomp prep-asm         --in work/corpus.jsonl         --out work/asm.jsonl
//! bindecomp prep-src         --in work/asm.jsonl            --out work/prepped.jsonl
//! bindecomp train-bpe        --in work/prepped.jsonl        --out work/tokenizers.json
//! bindecomp toss-reduce      --in work/prepped.jsonl        --tokenizers work/tokenizers.json --out work/reduced.jsonl
//! bindecomp split            --in work/reduced.jsonl        --out work/split
//! bindecomp train-decompiler --in work/split/train.jsonl    --tokenizers work/tokenizers.json --out work/decompiler.json
//! bindecomp evaluate         --task decompile --in work/split/test.jsonl --decompiler work/decompiler.json --out work/eval.json
//! bindecomp report           --in work/eval.json            --out work/report.txt
//! ```

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::asmprep::{prepare_asm, AsmError, PrunePolicy};
use crate::corpus::{ingest_pairs, split_from_manifest, stratified_split, Corpus, CorpusError, Manifest, StratifyKey};
use crate::metrics::{render_similarity_table, MetricsError};
use crate::neural::{loss_csv, Checkpoint, NeuralError, TrainReport};
use crate::srcprep::{normalize_source_with, SrcConfig, SrcError};
use crate::tasks::{
    balance_variants, biclass_labels, ensure_converged, multiclass_labels, run_decompile_eval, run_prediction_eval, train_bpe_on, Decompile, DecoderSpec, DecompileEvalReport, EmptyDecompiler, ExperimentSpec,
    IdentityDecompiler, LabeledDataset, NeuralClassifier, NeuralDecompiler, PredictionEvalReport, TaskError, TaskKind, BAD_LABEL, GOOD_LABEL,
};
use crate::tokenizer::{annotate_lengths, toss_reduce, BpeModel, Side, TokenizerError};

pub const SEED_ENV: &str = "BINDECOMP_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_errors!(CorpusError, TokenizerError, MetricsError, AsmError, SrcError);

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::NonFinite(_) => CliError::Diverged(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Diverged { .. } => CliError::Diverged(e.to_string()),
            TaskError::Neural(n) => n.into(),
            TaskError::InvalidSpec(m) => CliError::Usage(format!("invalid config: {m}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "bindecomp", version, about = "Neural decompilation and vulnerability prediction pipeline")]
pub struct Cli {
    /// Seed for every random choice; falls back to $BINDECOMP_SEED, then the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON pipeline config.
    #[arg(long, global = true, visible_alias = "spec")]
    pub config: Option<PathBuf>,
    /// Output path of the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-sample stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictionTask {
    Biclass,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Decompile,
    Biclass,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Identity,
    Empty,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pair assembly listings with their sources under a raw tree.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        /// Ids to keep, with optional pinned splits.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Fill `asm_norm` from `asm_raw` (a corpus file or a raw tree).
    PrepAsm {
        #[arg(long = "in")]
        input: PathBuf,
        /// Drop pairs whose listing fails instead of aborting.
        #[arg(long)]
        skip_failures: bool,
    },
    /// Fill `src_norm` from `src_raw`.
    PrepSrc {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        skip_failures: bool,
    },
    /// Learn one BPE model per side.
    TrainBpe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        merges: Option<usize>,
    },
    /// Write BPE ids of both sides, one JSON line per pair.
    Tokenize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        tokenizers: PathBuf,
    },
    /// Drop pairs outside the token-length percentile band.
    TossReduce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        tokenizers: PathBuf,
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
        #[arg(long)]
        side: Option<Side>,
    },
    /// Write `train.jsonl` and `test.jsonl` into the output directory.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        stratify: Option<StratifyKey>,
        /// Reproduce a pinned split instead of drawing one.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train the translation model on a training corpus.
    TrainDecompiler {
        #[arg(long = "in")]
        input: PathBuf,
        /// Tokenizers from `train-bpe`; trained on the input when absent.
        #[arg(long)]
        tokenizers: Option<PathBuf>,
    },
    /// Translate every pair's assembly, one JSON line per pair.
    Decompile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train a vulnerability classifier on original normalized source.
    TrainClassifier {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        task: PredictionTask,
        #[arg(long)]
        tokenizers: Option<PathBuf>,
    },
    /// Score decompilation, or classify decompiled test sources.
    Evaluate {
        #[arg(long, value_enum)]
        task: EvalTask,
        /// Test corpus.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        decompiler: Option<PathBuf>,
        /// Reference decompiler used when no model is given.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Render report files as fixed-width tables.
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::PrepAsm { .. } => "prep-asm",
            Command::PrepSrc { .. } => "prep-src",
            Command::TrainBpe { .. } => "train-bpe",
            Command::Tokenize { .. } => "tokenize",
            Command::TossReduce { .. } => "toss-reduce",
            Command::Split { .. } => "split",
            Command::TrainDecompiler { .. } => "train-decompiler",
            Command::Decompile { .. } => "decompile",
            Command::TrainClassifier { .. } => "train-classifier",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TossConfig {
    pub low: f64,
    pub high: f64,
    pub side: Side,
}

impl Default for TossConfig {
    fn default() -> Self {
        Self { low: 5.0, high: 95.0, side: Side::Both }
    }
}

/// Everything `--config` can set. Experiment fields sit at the top level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub experiment: ExperimentSpec,
    pub prune: PrunePolicy,
    pub source: SrcConfig,
    pub toss: TossConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        config.experiment.validate()?;
        Ok(config)
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub subcommand: String,
    pub config: PipelineConfig,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub wall_clock_secs: f64,
}

/// SHA-256 of a file, or of the sorted `path digest` lines of a directory.
pub fn digest_path(path: &Path) -> Result<String, CliError> {
    if path.is_dir() {
        let mut listing = String::new();
        for entry in WalkDir::new(path).sort_by_file_name() {
            let entry = entry.map_err(|e| io_error(path, e))?;
            if entry.file_type().is_file() {
                let rel = entry.path().strip_prefix(path).expect("under root");
                listing.push_str(&format!("{} {}\n", rel.display(), digest_path(entry.path())?));
            }
        }
        return Ok(hex::encode(Sha256::digest(listing.as_bytes())));
    }
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Both BPE models of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerPair {
    pub asm: BpeModel,
    pub src: BpeModel,
}

pub const DECOMPILER_FORMAT: &str = "bindecomp-decompiler";
pub const CLASSIFIER_FORMAT: &str = "bindecomp-classifier";

/// A trained decompiler with the tokenizers it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompilerArtifact {
    pub format: String,
    pub checkpoint: Checkpoint,
    pub asm_bpe: BpeModel,
    pub src_bpe: BpeModel,
    pub decoder: DecoderSpec,
}

impl DecompilerArtifact {
    pub fn new(d: &NeuralDecompiler) -> Self {
        Self {
            format: DECOMPILER_FORMAT.into(),
            checkpoint: Checkpoint::from_seq2seq(&d.model, d.train_ids.clone()),
            asm_bpe: d.asm_bpe.clone(),
            src_bpe: d.src_bpe.clone(),
            decoder: d.decoder.clone(),
        }
    }

    pub fn into_decompiler(self) -> Result<NeuralDecompiler, CliError> {
        if self.format != DECOMPILER_FORMAT {
            return Err(CliError::Data(format!("not a decompiler artifact (format `{}`)", self.format)));
        }
        let train_ids = self.checkpoint.train_ids.clone();
        Ok(NeuralDecompiler { model: self.checkpoint.into_seq2seq()?, asm_bpe: self.asm_bpe, src_bpe: self.src_bpe, decoder: self.decoder, train_ids })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub format: String,
    pub task: TaskKind,
    pub checkpoint: Checkpoint,
    pub bpe: BpeModel,
}

impl ClassifierArtifact {
    pub fn into_classifier(self) -> Result<(TaskKind, NeuralClassifier), CliError> {
        if self.format != CLASSIFIER_FORMAT {
            return Err(CliError::Data(format!("not a classifier artifact (format `{}`)", self.format)));
        }
        let labels = self.checkpoint.labels.clone();
        let train_ids = self.checkpoint.train_ids.clone();
        Ok((self.task, NeuralClassifier { model: self.checkpoint.into_classifier()?, bpe: self.bpe, labels, train_ids }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub id: String,
    pub asm: Vec<usize>,
    pub src: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompiledRecord {
    pub id: String,
    pub text: String,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).expect("row serializes"));
        text.push('\n');
    }
    write_text(path, &text)
}

/// Appends `suffix` to the file name: `a/b.json` + `.manifest.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Paths and notes one subcommand produced.
#[derive(Default)]
struct Effects {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
}

struct Context {
    config: PipelineConfig,
    seed: u64,
    out: Option<PathBuf>,
}

impl Context {
    fn out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
    }
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(config_seed),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let seed = resolve_seed(cli.seed, config.experiment.seed)?;
    config.experiment.seed = seed;
    let out = cli.out.clone().or_else(|| config.experiment.out.clone());
    let mut inputs = Vec::new();
    if let Some(path) = &cli.config {
        inputs.push(path.clone());
    }
    let ctx = Context { config, seed, out };
    let subcommand = cli.command.name();

    let result = execute(&ctx, cli.command);
    let mut effects = match result {
        Ok(effects) => effects,
        Err(Failure { error, effects }) => {
            if let Some(effects) = effects {
                write_manifest(&ctx, subcommand, inputs, effects, started)?;
            }
            return Err(error);
        }
    };
    inputs.append(&mut effects.inputs);
    write_manifest(&ctx, subcommand, inputs, effects, started)
}

fn write_manifest(ctx: &Context, subcommand: &str, inputs: Vec<PathBuf>, effects: Effects, started: Instant) -> Result<(), CliError> {
    let Some(out) = ctx.out.as_deref() else { return Ok(()) };
    let digests = |paths: &[PathBuf]| -> Result<BTreeMap<String, String>, CliError> {
        paths.iter().filter(|p| p.exists()).map(|p| Ok((p.display().to_string(), digest_path(p)?))).collect()
    };
    let manifest = RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config: ctx.config.clone(),
        seed: ctx.seed,
        inputs: digests(&inputs)?,
        outputs: digests(&effects.outputs)?,
        notes: effects.notes,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&sibling(out, ".manifest.json"), &manifest)
}

/// An error, plus what was written before it happened.
struct Failure {
    error: CliError,
    effects: Option<Effects>,
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { error: e.into(), effects: None }
    }
}

fn load_corpus(path: &Path, fx: &mut Effects) -> Result<Corpus, CliError> {
    fx.inputs.push(path.to_path_buf());
    Ok(Corpus::read_jsonl(path)?)
}

fn load_tokenizers(path: &Path, fx: &mut Effects) -> Result<TokenizerPair, CliError> {
    fx.inputs.push(path.to_path_buf());
    read_json(path)
}

fn save_corpus(corpus: &Corpus, out: &Path, fx: &mut Effects) -> Result<(), CliError> {
    write_text(out, &corpus.to_jsonl())?;
    fx.outputs.push(out.to_path_buf());
    Ok(())
}

/// Applies `f` to every pair in parallel; failures abort or drop the pair.
fn prep_pairs<F>(corpus: Corpus, skip_failures: bool, fx: &mut Effects, f: F) -> Result<Corpus, CliError>
where
    F: Fn(&mut crate::corpus::FunctionPair) -> Result<Vec<String>, CliError> + Sync,
{
    let results: Vec<_> = corpus
        .pairs
        .into_par_iter()
        .map(|mut p| {
            let r = f(&mut p);
            (p, r)
        })
        .collect();
    let mut kept = Vec::with_capacity(results.len());
    for (pair, result) in results {
        match result {
            Ok(diagnostics) => {
                fx.notes.extend(diagnostics.into_iter().map(|d| format!("{}: {d}", pair.id)));
                kept.push(pair);
            }
            Err(e) if skip_failures => fx.notes.push(format!("dropped {}: {e}", pair.id)),
            Err(e) => return Err(CliError::Data(format!("{}: {e}", pair.id))),
        }
    }
    Ok(Corpus::new(kept))
}

fn record_training(report: &TrainReport, out: &Path, fx: &mut Effects) -> Result<(), CliError> {
    let curve = sibling(out, ".loss.csv");
    write_text(&curve, &loss_csv(&report.curve))?;
    fx.outputs.push(curve);
    fx.notes.push(format!("stopped after {} steps: {:?}", report.steps, report.stop));
    if let Some(loss) = report.final_loss {
        fx.notes.push(format!("final training loss {loss}"));
    }
    fx.notes.extend(report.diagnostics.iter().cloned());
    Ok(())
}

fn execute(ctx: &Context, command: Command) -> Result<Effects, Failure> {
    let mut fx = Effects::default();
    let cfg = &ctx.config;
    match command {
        Command::Ingest { input, manifest } => {
            let out = ctx.out()?;
            fx.inputs.push(input.clone());
            let manifest = match manifest {
                Some(path) => {
                    fx.inputs.push(path.clone());
                    Some(Manifest::read(&path)?)
                }
                None => None,
            };
            let ingested = ingest_pairs(&input, manifest.as_ref())?;
            fx.notes.extend(ingested.warnings.iter().map(|w| format!("{}: {}", w.path, w.reason)));
            fx.notes.push(format!("{} pairs", ingested.corpus.len()));
            save_corpus(&ingested.corpus, out, &mut fx)?;
        }
        Command::PrepAsm { input, skip_failures } => {
            let out = ctx.out()?;
            let corpus = if input.is_dir() {
                fx.inputs.push(input.clone());
                ingest_pairs(&input, None)?.corpus
            } else {
                load_corpus(&input, &mut fx)?
            };
            let corpus = prep_pairs(corpus, skip_failures, &mut fx, |p| {
                let prepared = prepare_asm(&p.asm_raw, &cfg.prune)?;
                p.asm_norm = Some(prepared.text);
                Ok(prepared.diagnostics)
            })?;
            save_corpus(&corpus, out, &mut fx)?;
        }
        Command::PrepSrc { input, skip_failures } => {
            let out = ctx.out()?;
            let corpus = load_corpus(&input, &mut fx)?;
            let corpus = prep_pairs(corpus, skip_failures, &mut fx, |p| {
                let normalized = normalize_source_with(&p.src_raw, &cfg.source)?;
                p.src_norm = Some(normalized.text);
                Ok(normalized.diagnostics)
            })?;
            save_corpus(&corpus, out, &mut fx)?;
        }
        Command::TrainBpe { input, merges } => {
            let out = ctx.out()?;
            let corpus = load_corpus(&input, &mut fx)?;
            let merges = merges.unwrap_or(cfg.experiment.num_merges);
            let missing = |id: &str| CliError::from(TaskError::MissingNormalized(id.to_string()));
            let asm: Vec<&str> = corpus.pairs.iter().map(|p| p.asm_norm.as_deref().ok_or_else(|| missing(&p.id))).collect::<Result<_, _>>()?;
            let src: Vec<&str> = corpus.pairs.iter().map(|p| p.src_norm.as_deref().ok_or_else(|| missing(&p.id))).collect::<Result<_, _>>()?;
            let pair = TokenizerPair { asm: train_bpe_on(asm, merges)?, src: train_bpe_on(src, merges)? };
            fx.notes.push(format!("vocabulary sizes: asm {}, src {}", pair.asm.vocab_size(), pair.src.vocab_size()));
            write_json(out, &pair)?;
            fx.outputs.push(out.to_path_buf());
        }
        Command::Tokenize { input, tokenizers } => {
            let out = ctx.out()?;
            let corpus = load_corpus(&input, &mut fx)?;
            let tok = load_tokenizers(&tokenizers, &mut fx)?;
            let rows: Vec<TokenRecord> = corpus
                .pairs
                .par_iter()
                .map(|p| {
                    let asm = p.asm_norm.as_deref().ok_or_else(|| TaskError::MissingNormalized(p.id.clone()))?;
                    let src = p.src_norm.as_deref().ok_or_else(|| TaskError::MissingNormalized(p.id.clone()))?;
                    Ok(TokenRecord { id: p.id.clone(), asm: tok.asm.encode_text(asm).ids, src: tok.src.encode_text(src).ids })
                })
                .collect::<Result<_, TaskError>>()?;
            write_jsonl(out, &rows)?;
            fx.outputs.push(out.to_path_buf());
        }
        Command::TossReduce { input, tokenizers, low, high, side } => {
            let out = ctx.out()?;
            let mut corpus = load_corpus(&input, &mut fx)?;
            let tok = load_tokenizers(&tokenizers, &mut fx)?;
            annotate_lengths(&mut corpus, &tok.asm, &tok.src);
            let (low, high, side) = (low.unwrap_or(cfg.toss.low), high.unwrap_or(cfg.toss.high), side.unwrap_or(cfg.toss.side));
            let (reduced, report) = toss_reduce(&corpus, low, high, side)?;
            fx.notes.push(format!("kept {} of {} pairs; bounds asm {:?}, src {:?}", report.kept, report.kept + report.dropped, report.source_bounds, report.target_bounds));
            save_corpus(&reduced, out, &mut fx)?;
        }
        Command::Split { input, fraction, stratify, manifest } => {
            let out = ctx.out()?;
            let corpus = load_corpus(&input, &mut fx)?;
            let (train, test) = match manifest {
                Some(path) => {
                    fx.inputs.push(path.clone());
                    split_from_manifest(&corpus, &Manifest::read(&path)?)?
                }
                None => stratified_split(&corpus, fraction.unwrap_or(cfg.experiment.test_fraction), stratify.unwrap_or(cfg.experiment.stratify), ctx.seed)?,
            };
            fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
            save_corpus(&train, &out.join("train.jsonl"), &mut fx)?;
            save_corpus(&test, &out.join("test.jsonl"), &mut fx)?;
            fx.notes.push(format!("{} train, {} test", train.len(), test.len()));
        }
        Command::TrainDecompiler { input, tokenizers } => {
            let out = ctx.out()?;
            let train = load_corpus(&input, &mut fx)?;
            let e = &cfg.experiment;
            let (decompiler, report) = match tokenizers {
                Some(path) => {
                    let tok = load_tokenizers(&path, &mut fx)?;
                    NeuralDecompiler::train_with(&train, tok.asm, tok.src, &e.decompiler, e.decoder.clone(), ctx.seed)?
                }
                None => NeuralDecompiler::train(&train, e.num_merges, &e.decompiler, e.decoder.clone(), ctx.seed)?,
            };
            record_training(&report, out, &mut fx)?;
            if let Err(error) = ensure_converged(&report, "decompiler") {
                return Err(Failure { error: error.into(), effects: Some(fx) });
            }
            write_json(out, &DecompilerArtifact::new(&decompiler))?;
            fx.outputs.push(out.to_path_buf());
        }
        Command::Decompile { input, model } => {
            let out = ctx.out()?;
            let corpus = load_corpus(&input, &mut fx)?;
            fx.inputs.push(model.clone());
            let decompiler = read_json::<DecompilerArtifact>(&model)?.into_decompiler()?;
            let rows: Vec<DecompiledRecord> = corpus
                .pairs
                .par_iter()
                .map(|p| Ok(DecompiledRecord { id: p.id.clone(), text: decompiler.decompile(p)? }))
                .collect::<Result<_, TaskError>>()?;
            write_jsonl(out, &rows)?;
            fx.outputs.push(out.to_path_buf());
        }
        Command::TrainClassifier { input, task, tokenizers } => {
            let out = ctx.out()?;
            let train = load_corpus(&input, &mut fx)?;
            let e = &cfg.experiment;
            let (kind, samples, labels) = match task {
                PredictionTask::Biclass => {
                    let (balanced, removed) = balance_variants(&train, ctx.seed)?;
                    fx.notes.push(format!("downsampled {} majority-class pairs", removed.len()));
                    (TaskKind::Biclass, biclass_labels(&balanced)?, vec![GOOD_LABEL.to_string(), BAD_LABEL.to_string()])
                }
                PredictionTask::Multiclass => {
                    let (samples, dropped) = multiclass_labels(&train, &e.label_space)?;
                    if samples.is_empty() {
                        return Err(TaskError::EmptyAfterFilter { dropped: dropped.len() }.into());
                    }
                    fx.notes.push(format!("dropped {} pairs outside the label space", dropped.len()));
                    (TaskKind::Multiclass, samples, e.label_space.labels())
                }
            };
            let bpe = match tokenizers {
                Some(path) => load_tokenizers(&path, &mut fx)?.src,
                None => train_bpe_on(samples.iter().map(|s| s.text.as_str()), e.num_merges)?,
            };
            let (classifier, report) = NeuralClassifier::train(&samples, labels.clone(), bpe, &e.classifier, ctx.seed)?;
            record_training(&report, out, &mut fx)?;
            if let Err(error) = ensure_converged(&report, "classifier") {
                return Err(Failure { error: error.into(), effects: Some(fx) });
            }
            let artifact = ClassifierArtifact {
                format: CLASSIFIER_FORMAT.into(),
                task: kind,
                checkpoint: Checkpoint::from_classifier(&classifier.model, labels, classifier.train_ids.clone()),
                bpe: classifier.bpe.clone(),
            };
            write_json(out, &artifact)?;
            fx.outputs.push(out.to_path_buf());
        }
        Command::Evaluate { task, input, decompiler, baseline, classifier } => {
            let out = ctx.out()?;
            let test = load_corpus(&input, &mut fx)?;
            let decompiler: Box<dyn Decompile> = match (decompiler, baseline) {
                (Some(path), None) => {
                    fx.inputs.push(path.clone());
                    Box::new(read_json::<DecompilerArtifact>(&path)?.into_decompiler()?)
                }
                (None, Some(Baseline::Identity)) => Box::new(IdentityDecompiler),
                (None, Some(Baseline::Empty)) => Box::new(EmptyDecompiler),
                _ => return Err(CliError::Usage("give exactly one of --decompiler and --baseline".into()).into()),
            };
            let mut spec = cfg.experiment.clone();
            match task {
                EvalTask::Decompile => {
                    spec.task = TaskKind::DecompileEval;
                    let report = run_decompile_eval(&spec, &test, decompiler.as_ref())?;
                    fx.notes.push(format!("edit similarity {:.4}", report.scores.edit_similarity));
                    write_json(out, &report)?;
                }
                EvalTask::Biclass | EvalTask::Multiclass => {
                    let path = classifier.ok_or_else(|| CliError::Usage("--classifier is required for prediction tasks".into()))?;
                    fx.inputs.push(path.clone());
                    let (kind, classifier) = read_json::<ClassifierArtifact>(&path)?.into_classifier()?;
                    spec.task = if task == EvalTask::Biclass { TaskKind::Biclass } else { TaskKind::Multiclass };
                    if kind != spec.task {
                        return Err(CliError::Usage(format!("classifier was trained for {kind}, not {}", spec.task)).into());
                    }
                    let (samples, dropped) = match kind {
                        TaskKind::Biclass => (biclass_labels(&test)?, Vec::new()),
                        _ => multiclass_labels(&test, &spec.label_space)?,
                    };
                    let dataset = LabeledDataset { labels: classifier.labels.clone(), train: Vec::new(), test: samples, dropped, downsampled: Vec::new() };
                    let report = run_prediction_eval(&spec, &dataset, &test, decompiler.as_ref(), &classifier)?;
                    fx.notes.push(format!("accuracy {:.4} (original source {:.4})", report.decompiled.accuracy, report.control.accuracy));
                    write_json(out, &report)?;
                }
            }
            fx.outputs.push(out.to_path_buf());
        }
        Command::Report { inputs } => {
            let mut similarity = Vec::new();
            let mut tables = Vec::new();
            for path in &inputs {
                fx.inputs.push(path.clone());
                let value: serde_json::Value = read_json(path)?;
                if value.get("scores").is_some() {
                    let r: DecompileEvalReport = serde_json::from_value(value).map_err(|e| io_error(path, e))?;
                    similarity.push((r.decompiler.clone(), r.scores));
                } else {
                    let r: PredictionEvalReport = serde_json::from_value(value).map_err(|e| io_error(path, e))?;
                    tables.push(format!("{} (seed {}, spec {})\n{}", r.header.task, r.header.seed, &r.header.spec_hash[..12], r.table()));
                }
            }
            if !similarity.is_empty() {
                let rows: Vec<(&str, _)> = similarity.iter().map(|(n, s)| (n.as_str(), *s)).collect();
                tables.insert(0, render_similarity_table(&rows));
            }
            let text = tables.join("\n");
            match &ctx.out {
                Some(out) => {
                    write_text(out, &text)?;
                    fx.outputs.push(out.clone());
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(fx)
}
