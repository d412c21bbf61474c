//! Prediction datasets and the two evaluations: decompilation quality and
//! vulnerability prediction on decompiled code.
//!
//! One experiment uses one train/test partition for both the decompiler and
//! the classifier. A sample's label applies to its whole normalized text,
//! helper functions included.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{stratified_split, stratified_split_by, Corpus, CorpusError, CweId, FunctionPair, StratifyKey, Variant};
use crate::metrics::{
    classification_report, corpus_scores, render_classification_table, render_similarity_table, text_similarity, ClassificationReport, CorpusScores, MetricsError, SimilarityScores,
};
use crate::neural::{decode, train_classifier, train_seq2seq, ClassExample, ClassifierModel, NeuralError, Seq2SeqExample, Seq2SeqModel, TrainReport, TrainSchedule, TransformerConfig};
use crate::tokenizer::{bpe_train, count_words, pretokenize, BpeModel, TokenizerError, UNK_ID};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("corpus holds only {0} samples; both variants are required")]
    OneClassOnly(Variant),
    #[error("no samples left after filtering to the label space ({dropped} dropped)")]
    EmptyAfterFilter { dropped: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("`{0}` has no normalized text")]
    MissingNormalized(String),
    #[error("label space: {0}")]
    BadLabelSpace(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{} test id(s) also used for training, e.g. `{}`", .0.len(), .0[0])]
    Leakage(Vec<String>),
    #[error("{stage} training diverged at step {step}: {message}")]
    Diverged { stage: String, step: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub const CWE_LABELS: [u32; 20] = [190, 762, 121, 590, 194, 197, 78, 36, 23, 690, 369, 457, 134, 680, 758, 400, 789, 253, 398, 761];
pub const GOOD_LABEL: &str = "good";
pub const BAD_LABEL: &str = "bad";

/// Twenty CWE classes plus one class for non-vulnerable functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelSpaceRepr", into = "LabelSpaceRepr")]
pub struct LabelSpace {
    cwe_ids: Vec<CweId>,
    good_label: String,
}

#[derive(Serialize, Deserialize)]
struct LabelSpaceRepr {
    cwe_ids: Vec<CweId>,
    good_label: String,
}

impl TryFrom<LabelSpaceRepr> for LabelSpace {
    type Error = TaskError;
    fn try_from(r: LabelSpaceRepr) -> Result<Self, TaskError> {
        LabelSpace::new(r.cwe_ids, r.good_label)
    }
}

impl From<LabelSpace> for LabelSpaceRepr {
    fn from(l: LabelSpace) -> Self {
        Self { cwe_ids: l.cwe_ids, good_label: l.good_label }
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        let cwe_ids = CWE_LABELS.iter().map(|&c| CweId::new(c).expect("nonzero")).collect();
        Self { cwe_ids, good_label: GOOD_LABEL.to_string() }
    }
}

impl LabelSpace {
    pub const CWE_COUNT: usize = 20;

    pub fn new(cwe_ids: Vec<CweId>, good_label: impl Into<String>) -> Result<Self, TaskError> {
        let good_label = good_label.into();
        if cwe_ids.len() != Self::CWE_COUNT {
            return Err(TaskError::BadLabelSpace(format!("{} CWE ids, expected {}", cwe_ids.len(), Self::CWE_COUNT)));
        }
        if cwe_ids.iter().collect::<BTreeSet<_>>().len() != cwe_ids.len() {
            return Err(TaskError::BadLabelSpace("duplicate CWE id".into()));
        }
        if good_label.is_empty() || cwe_ids.iter().any(|c| c.value().to_string() == good_label) {
            return Err(TaskError::BadLabelSpace(format!("good label `{good_label}` collides with a CWE label")));
        }
        Ok(Self { cwe_ids, good_label })
    }

    pub fn cwe_ids(&self) -> &[CweId] {
        &self.cwe_ids
    }

    pub fn good_label(&self) -> &str {
        &self.good_label
    }

    /// Class names in head order: the CWE numbers, then the good label.
    pub fn labels(&self) -> Vec<String> {
        self.cwe_ids.iter().map(|c| c.value().to_string()).chain([self.good_label.clone()]).collect()
    }

    pub fn n_classes(&self) -> usize {
        self.cwe_ids.len() + 1
    }

    /// Class index of a pair, or `None` for a bad pair outside the space.
    pub fn label_of(&self, pair: &FunctionPair) -> Option<usize> {
        match pair.variant {
            Variant::Good => Some(self.cwe_ids.len()),
            Variant::Bad => self.cwe_ids.iter().position(|&c| c == pair.cwe),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub label: usize,
    /// Normalized source text.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub labels: Vec<String>,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    /// Bad samples whose CWE is outside the label space.
    pub dropped: Vec<String>,
    /// Majority-class samples removed for balance.
    pub downsampled: Vec<String>,
}

impl LabeledDataset {
    pub fn test_ids(&self) -> BTreeSet<String> {
        self.test.iter().map(|s| s.id.clone()).collect()
    }

    pub fn train_ids(&self) -> Vec<String> {
        self.train.iter().map(|s| s.id.clone()).collect()
    }

    /// Per-label sample counts of one side.
    pub fn label_counts(&self, samples: &[LabeledSample]) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for s in samples {
            *out.entry(self.labels[s.label].clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn check_disjoint(&self) -> Result<(), TaskError> {
        let test = self.test_ids();
        let shared: Vec<String> = self.train.iter().filter(|s| test.contains(&s.id)).map(|s| s.id.clone()).collect();
        if shared.is_empty() { Ok(()) } else { Err(TaskError::Leakage(shared)) }
    }
}

fn normalized_src(pair: &FunctionPair) -> Result<String, TaskError> {
    pair.src_norm.clone().ok_or_else(|| TaskError::MissingNormalized(pair.id.clone()))
}

fn normalized_asm(pair: &FunctionPair) -> Result<&str, TaskError> {
    pair.asm_norm.as_deref().ok_or_else(|| TaskError::MissingNormalized(pair.id.clone()))
}

fn to_samples(corpus: &Corpus, label: impl Fn(&FunctionPair) -> usize) -> Result<Vec<LabeledSample>, TaskError> {
    corpus.pairs.iter().map(|p| Ok(LabeledSample { id: p.id.clone(), label: label(p), text: normalized_src(p)? })).collect()
}

/// Good/bad labels over the whole corpus, without balancing or splitting.
pub fn biclass_labels(corpus: &Corpus) -> Result<Vec<LabeledSample>, TaskError> {
    to_samples(corpus, |p| usize::from(p.variant == Variant::Bad))
}

/// Downsamples the majority variant to the minority count. The survivors
/// keep input order; the second value lists removed ids.
pub fn balance_variants(corpus: &Corpus, seed: u64) -> Result<(Corpus, Vec<String>), TaskError> {
    let (good, bad): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| corpus.pairs[i].variant == Variant::Good);
    match (good.is_empty(), bad.is_empty()) {
        (true, _) => return Err(TaskError::OneClassOnly(Variant::Bad)),
        (_, true) => return Err(TaskError::OneClassOnly(Variant::Good)),
        _ => {}
    }
    let (mut majority, minority_len) = if good.len() > bad.len() { (good, bad.len()) } else { (bad, good.len()) };
    majority.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let removed: BTreeSet<usize> = majority[minority_len..].iter().copied().collect();
    let mut kept = Vec::with_capacity(corpus.len() - removed.len());
    let mut dropped = Vec::with_capacity(removed.len());
    for (i, pair) in corpus.pairs.iter().enumerate() {
        if removed.contains(&i) { dropped.push(pair.id.clone()) } else { kept.push(pair.clone()) }
    }
    Ok((corpus.with_pairs(kept), dropped))
}

/// 50-50 good/bad dataset with a label-stratified split.
pub fn build_biclass_dataset(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<LabeledDataset, TaskError> {
    let (balanced, downsampled) = balance_variants(corpus, seed)?;
    let (train, test) = stratified_split(&balanced, test_fraction, StratifyKey::Variant, seed)?;
    let label = |p: &FunctionPair| usize::from(p.variant == Variant::Bad);
    Ok(LabeledDataset {
        labels: vec![GOOD_LABEL.to_string(), BAD_LABEL.to_string()],
        train: to_samples(&train, label)?,
        test: to_samples(&test, label)?,
        dropped: Vec::new(),
        downsampled,
    })
}

/// Keeps good pairs and bad pairs whose CWE is in `space`; the rest are
/// reported as dropped.
pub fn filter_label_space(corpus: &Corpus, space: &LabelSpace) -> (Corpus, Vec<String>) {
    let (kept, dropped): (Vec<&FunctionPair>, Vec<&FunctionPair>) = corpus.pairs.iter().partition(|p| space.label_of(p).is_some());
    (corpus.with_pairs(kept.into_iter().cloned().collect()), dropped.into_iter().map(|p| p.id.clone()).collect())
}

/// Multiclass labels for a corpus, without splitting.
pub fn multiclass_labels(corpus: &Corpus, space: &LabelSpace) -> Result<(Vec<LabeledSample>, Vec<String>), TaskError> {
    let (kept, dropped) = filter_label_space(corpus, space);
    let samples = to_samples(&kept, |p| space.label_of(p).expect("filtered"))?;
    Ok((samples, dropped))
}

/// 21-class dataset split with stratification by class.
pub fn build_multiclass_dataset(corpus: &Corpus, space: &LabelSpace, test_fraction: f64, seed: u64) -> Result<LabeledDataset, TaskError> {
    let (kept, dropped) = filter_label_space(corpus, space);
    if kept.pairs.is_empty() {
        return Err(TaskError::EmptyAfterFilter { dropped: dropped.len() });
    }
    let labels = space.labels();
    let class = |p: &FunctionPair| space.label_of(p).expect("filtered");
    let (train, test) = stratified_split_by(&kept, test_fraction, seed, |p| labels[class(p)].clone())?;
    Ok(LabeledDataset { labels, train: to_samples(&train, class)?, test: to_samples(&test, class)?, dropped, downsampled: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Biclass,
    Multiclass,
    DecompileEval,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Biclass => "biclass",
            TaskKind::Multiclass => "multiclass",
            TaskKind::DecompileEval => "decompile_eval",
        })
    }
}

/// Model settings; vocabulary sizes and seeds are filled in at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct ModelSpec {
    pub model: TransformerConfig,
    pub schedule: TrainSchedule,
}


impl ModelSpec {
    fn config(&self, vocab_src: usize, vocab_tgt: usize, seed: u64) -> TransformerConfig {
        TransformerConfig { vocab_src, vocab_tgt, seed, ..self.model.clone() }
    }

    fn schedule(&self, seed: u64) -> TrainSchedule {
        TrainSchedule { seed, ..self.schedule.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderSpec {
    pub beam_width: usize,
    /// Maximum generated tokens; 0 means the model's `max_seq_len - 1`.
    pub max_len: usize,
}

impl Default for DecoderSpec {
    fn default() -> Self {
        Self { beam_width: 5, max_len: 0 }
    }
}

/// One experiment. The single `seed` drives splitting, balancing, weight
/// initialization and batch order; seeds inside the model sections are
/// overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub task: TaskKind,
    pub seed: u64,
    pub test_fraction: f64,
    /// Partition key for `decompile_eval`; the prediction tasks stratify by
    /// their label.
    pub stratify: StratifyKey,
    pub num_merges: usize,
    pub decompiler: ModelSpec,
    pub decoder: DecoderSpec,
    pub classifier: ModelSpec,
    pub label_space: LabelSpace,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            task: TaskKind::Biclass,
            seed: 0,
            test_fraction: 0.2,
            stratify: StratifyKey::Variant,
            num_merges: 4000,
            decompiler: ModelSpec::default(),
            decoder: DecoderSpec::default(),
            classifier: ModelSpec::default(),
            label_space: LabelSpace::default(),
            out: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| TaskError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let text = std::fs::read_to_string(path).map_err(|e| TaskError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(TaskError::InvalidSpec(format!("test_fraction {} is outside (0, 1)", self.test_fraction)));
        }
        if self.decoder.beam_width == 0 {
            return Err(TaskError::InvalidSpec("beam_width must be positive".into()));
        }
        for (name, m) in [("decompiler", &self.decompiler), ("classifier", &self.classifier)] {
            m.config(1, 1, 0).validate().map_err(|e| TaskError::InvalidSpec(format!("{name}: {e}")))?;
            if m.schedule.batch_size == 0 || m.schedule.lr.is_nan() || m.schedule.lr <= 0.0 {
                return Err(TaskError::InvalidSpec(format!("{name}: batch_size and lr must be positive")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("spec serializes")))
    }
}

/// Trains a BPE model on the whitespace words of `texts`.
pub fn train_bpe_on<'a, I>(texts: I, num_merges: usize) -> Result<BpeModel, TaskError>
where
    I: IntoIterator<Item = &'a str>,
{
    let words = count_words(texts.into_iter().flat_map(pretokenize));
    Ok(bpe_train(&words, num_merges)?)
}

/// Token ids for model input. Empty text becomes a single `<unk>`, since
/// models reject empty sequences.
fn model_input(bpe: &BpeModel, text: &str, max_len: usize) -> Vec<usize> {
    let mut ids = bpe.encode_text(text).ids;
    if ids.is_empty() {
        ids.push(UNK_ID);
    }
    ids.truncate(max_len);
    ids
}

pub fn ensure_converged(report: &TrainReport, stage: &str) -> Result<(), TaskError> {
    match &report.stop {
        crate::neural::StopReason::Diverged { step, message } => Err(TaskError::Diverged { stage: stage.to_string(), step: *step, message: message.clone() }),
        _ => Ok(()),
    }
}

/// Something that turns a pair's normalized assembly into C text.
pub trait Decompile: Sync {
    fn name(&self) -> String;
    fn decompile(&self, pair: &FunctionPair) -> Result<String, TaskError>;
    /// Ids the decompiler was trained on, when known.
    fn train_ids(&self) -> Option<&[String]> {
        None
    }
}

/// Returns the reference source unchanged. Upper bound for any decompiler.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDecompiler;

impl Decompile for IdentityDecompiler {
    fn name(&self) -> String {
        "identity".into()
    }
    fn decompile(&self, pair: &FunctionPair) -> Result<String, TaskError> {
        normalized_src(pair)
    }
}

/// Outputs nothing. Lower bound for any decompiler.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyDecompiler;

impl Decompile for EmptyDecompiler {
    fn name(&self) -> String {
        "empty".into()
    }
    fn decompile(&self, _: &FunctionPair) -> Result<String, TaskError> {
        Ok(String::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralDecompiler {
    pub model: Seq2SeqModel,
    pub asm_bpe: BpeModel,
    pub src_bpe: BpeModel,
    pub decoder: DecoderSpec,
    pub train_ids: Vec<String>,
}

impl NeuralDecompiler {
    /// Trains on `train` with the given tokenizers. Truncation notes are
    /// appended to the report's diagnostics.
    pub fn train_with(train: &Corpus, asm_bpe: BpeModel, src_bpe: BpeModel, spec: &ModelSpec, decoder: DecoderSpec, seed: u64) -> Result<(Self, TrainReport), TaskError> {
        let cfg = spec.config(asm_bpe.vocab_size(), src_bpe.vocab_size(), seed);
        let mut model = Seq2SeqModel::new(cfg.clone())?;
        let mut data = Vec::with_capacity(train.len());
        let mut notes = Vec::new();
        for pair in &train.pairs {
            let src = model_input(&asm_bpe, normalized_asm(pair)?, usize::MAX);
            let tgt = src_bpe.encode_text(&normalized_src(pair)?).ids;
            let (ex, note) = Seq2SeqExample::fitted(pair.id.clone(), src, tgt, &cfg);
            data.push(ex);
            notes.extend(note);
        }
        let mut report = train_seq2seq(&mut model, &data, &spec.schedule(seed))?;
        report.diagnostics.extend(notes);
        let train_ids = train.ids().into_iter().map(str::to_string).collect();
        Ok((Self { model, asm_bpe, src_bpe, decoder, train_ids }, report))
    }

    /// Trains both tokenizers and the model on `train` only.
    pub fn train(train: &Corpus, num_merges: usize, spec: &ModelSpec, decoder: DecoderSpec, seed: u64) -> Result<(Self, TrainReport), TaskError> {
        let asm: Vec<&str> = train.pairs.iter().map(normalized_asm).collect::<Result<_, _>>()?;
        let src: Vec<String> = train.pairs.iter().map(normalized_src).collect::<Result<_, _>>()?;
        let asm_bpe = train_bpe_on(asm, num_merges)?;
        let src_bpe = train_bpe_on(src.iter().map(String::as_str), num_merges)?;
        Self::train_with(train, asm_bpe, src_bpe, spec, decoder, seed)
    }

    fn max_len(&self) -> usize {
        let cap = self.model.config.max_seq_len - 1;
        if self.decoder.max_len == 0 { cap } else { self.decoder.max_len.min(cap) }
    }

    pub fn decompile_text(&self, asm_norm: &str) -> Result<String, TaskError> {
        let src = model_input(&self.asm_bpe, asm_norm, self.model.config.max_seq_len);
        let ids = decode(&self.model, &src, self.decoder.beam_width, self.max_len())?;
        Ok(self.src_bpe.decode_ids(&ids))
    }
}

impl Decompile for NeuralDecompiler {
    fn name(&self) -> String {
        "transformer".into()
    }
    fn decompile(&self, pair: &FunctionPair) -> Result<String, TaskError> {
        self.decompile_text(normalized_asm(pair)?)
    }
    fn train_ids(&self) -> Option<&[String]> {
        Some(&self.train_ids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralClassifier {
    pub model: ClassifierModel,
    pub bpe: BpeModel,
    pub labels: Vec<String>,
    pub train_ids: Vec<String>,
}

impl NeuralClassifier {
    pub fn train(samples: &[LabeledSample], labels: Vec<String>, bpe: BpeModel, spec: &ModelSpec, seed: u64) -> Result<(Self, TrainReport), TaskError> {
        let cfg = spec.config(bpe.vocab_size(), bpe.vocab_size(), seed);
        let mut model = ClassifierModel::new(cfg.clone(), labels.len())?;
        let mut notes = Vec::new();
        let data: Vec<ClassExample> = samples
            .iter()
            .map(|s| {
                let (ex, note) = ClassExample::fitted(s.id.clone(), model_input(&bpe, &s.text, usize::MAX), s.label, &cfg);
                notes.extend(note);
                ex
            })
            .collect();
        let mut report = train_classifier(&mut model, &data, &spec.schedule(seed))?;
        report.diagnostics.extend(notes);
        let train_ids = samples.iter().map(|s| s.id.clone()).collect();
        Ok((Self { model, bpe, labels, train_ids }, report))
    }

    pub fn predict(&self, text: &str) -> Result<usize, TaskError> {
        Ok(self.model.predict(&model_input(&self.bpe, text, self.model.config.max_seq_len))?)
    }

    /// Predictions for many texts, computed in parallel.
    pub fn predict_all<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<usize>, TaskError> {
        texts.par_iter().map(|t| self.predict(t.as_ref())).collect()
    }
}

/// Identifies the experiment a report belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub toolkit_version: String,
    pub task: TaskKind,
    pub spec_hash: String,
    pub seed: u64,
    pub counts: BTreeMap<String, usize>,
    pub label_space: Vec<String>,
}

impl ReportHeader {
    pub fn new(spec: &ExperimentSpec, counts: BTreeMap<String, usize>, label_space: Vec<String>) -> Self {
        Self { toolkit_version: env!("CARGO_PKG_VERSION").to_string(), task: spec.task, spec_hash: spec.hash(), seed: spec.seed, counts, label_space }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub id: String,
    pub scores: SimilarityScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompileEvalReport {
    pub header: ReportHeader,
    pub decompiler: String,
    pub scores: CorpusScores,
    pub per_pair: Vec<PairScore>,
    /// Decompiled text per test id.
    pub outputs: BTreeMap<String, String>,
}

impl DecompileEvalReport {
    pub fn table(&self) -> String {
        render_similarity_table(&[(self.decompiler.as_str(), self.scores)])
    }
}

fn check_leakage(train_ids: Option<&[String]>, test: &BTreeSet<String>) -> Result<(), TaskError> {
    let Some(train_ids) = train_ids else { return Ok(()) };
    let shared: Vec<String> = train_ids.iter().filter(|id| test.contains(*id)).cloned().collect();
    if shared.is_empty() { Ok(()) } else { Err(TaskError::Leakage(shared)) }
}

/// Decompiles every test pair and scores it against its reference source.
pub fn run_decompile_eval(spec: &ExperimentSpec, test: &Corpus, decompiler: &dyn Decompile) -> Result<DecompileEvalReport, TaskError> {
    if test.pairs.is_empty() {
        return Err(TaskError::EmptyTestSet);
    }
    let test_ids: BTreeSet<String> = test.pairs.iter().map(|p| p.id.clone()).collect();
    check_leakage(decompiler.train_ids(), &test_ids)?;
    let rows: Vec<(String, String, String)> = test
        .pairs
        .par_iter()
        .map(|p| Ok((p.id.clone(), decompiler.decompile(p)?, normalized_src(p)?)))
        .collect::<Result<_, TaskError>>()?;
    let text_pairs: Vec<(&str, &str)> = rows.iter().map(|(_, c, r)| (c.as_str(), r.as_str())).collect();
    let scores = corpus_scores(&text_pairs)?;
    let per_pair = rows.par_iter().map(|(id, c, r)| PairScore { id: id.clone(), scores: text_similarity(c, r) }).collect();
    let counts = BTreeMap::from([("test".to_string(), test.len())]);
    Ok(DecompileEvalReport {
        header: ReportHeader::new(spec, counts, Vec::new()),
        decompiler: decompiler.name(),
        scores,
        per_pair,
        outputs: rows.into_iter().map(|(id, c, _)| (id, c)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEvalReport {
    pub header: ReportHeader,
    pub decompiler: String,
    /// Classifier evaluated on decompiled test sources.
    pub decompiled: ClassificationReport,
    /// Same classifier on the original test sources.
    pub control: ClassificationReport,
    pub accuracy_delta: f64,
    pub macro_f1_delta: f64,
}

impl PredictionEvalReport {
    pub fn table(&self) -> String {
        let multi = self.header.task == TaskKind::Multiclass;
        let row = |r| if multi { (None, Some(r)) } else { (Some(r), None) };
        let (d_bin, d_multi) = row(&self.decompiled);
        let (c_bin, c_multi) = row(&self.control);
        let decompiled = format!("{} (decompiled)", self.decompiler);
        render_classification_table(&[(decompiled.as_str(), d_bin, d_multi), ("original source", c_bin, c_multi)])
    }
}

/// Classifies decompiled test sources and the original test sources with a
/// classifier trained on original source. `corpus` supplies the assembly of
/// each test id.
pub fn run_prediction_eval(spec: &ExperimentSpec, dataset: &LabeledDataset, corpus: &Corpus, decompiler: &dyn Decompile, classifier: &NeuralClassifier) -> Result<PredictionEvalReport, TaskError> {
    if dataset.test.is_empty() {
        return Err(TaskError::EmptyTestSet);
    }
    dataset.check_disjoint()?;
    let test_ids = dataset.test_ids();
    check_leakage(decompiler.train_ids(), &test_ids)?;
    check_leakage(Some(&classifier.train_ids), &test_ids)?;

    let by_id: BTreeMap<&str, &FunctionPair> = corpus.pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let decompiled: Vec<String> = dataset
        .test
        .par_iter()
        .map(|s| {
            let pair = by_id.get(s.id.as_str()).ok_or_else(|| TaskError::MissingNormalized(s.id.clone()))?;
            decompiler.decompile(pair)
        })
        .collect::<Result<_, _>>()?;
    let original: Vec<&str> = dataset.test.iter().map(|s| s.text.as_str()).collect();

    let name = |i: usize| dataset.labels[i].as_str();
    let actual: Vec<&str> = dataset.test.iter().map(|s| name(s.label)).collect();
    let labels: Vec<&str> = dataset.labels.iter().map(String::as_str).collect();
    let report_for = |texts: &[&str]| -> Result<ClassificationReport, TaskError> {
        let predicted: Vec<&str> = classifier.predict_all(texts)?.into_iter().map(name).collect();
        Ok(classification_report(&predicted, &actual, &labels)?)
    };
    let decompiled_refs: Vec<&str> = decompiled.iter().map(String::as_str).collect();
    let on_decompiled = report_for(&decompiled_refs)?;
    let control = report_for(&original)?;

    let counts = BTreeMap::from([
        ("train".to_string(), dataset.train.len()),
        ("test".to_string(), dataset.test.len()),
        ("dropped".to_string(), dataset.dropped.len()),
        ("downsampled".to_string(), dataset.downsampled.len()),
    ]);
    Ok(PredictionEvalReport {
        header: ReportHeader::new(spec, counts, dataset.labels.clone()),
        decompiler: decompiler.name(),
        accuracy_delta: on_decompiled.accuracy - control.accuracy,
        macro_f1_delta: on_decompiled.macro_f1 - control.macro_f1,
        decompiled: on_decompiled,
        control,
    })
}

/// Everything one in-memory experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub decompile: DecompileEvalReport,
    pub prediction: Option<PredictionEvalReport>,
    pub decompiler_training: TrainReport,
    pub classifier_training: Option<TrainReport>,
}

/// Partitions once, trains the decompiler on everything outside the test
/// partition, then runs the evaluations the task calls for.
pub fn run_experiment(spec: &ExperimentSpec, corpus: &Corpus) -> Result<ExperimentOutcome, TaskError> {
    spec.validate()?;
    let dataset = match spec.task {
        TaskKind::Biclass => Some(build_biclass_dataset(corpus, spec.test_fraction, spec.seed)?),
        TaskKind::Multiclass => Some(build_multiclass_dataset(corpus, &spec.label_space, spec.test_fraction, spec.seed)?),
        TaskKind::DecompileEval => None,
    };
    let (train, test) = match &dataset {
        Some(d) => {
            let test_ids = d.test_ids();
            let (test, train): (Vec<FunctionPair>, Vec<FunctionPair>) = corpus.pairs.iter().cloned().partition(|p| test_ids.contains(&p.id));
            (corpus.with_pairs(train), corpus.with_pairs(test))
        }
        None => stratified_split(corpus, spec.test_fraction, spec.stratify, spec.seed)?,
    };
    let (decompiler, decompiler_training) = NeuralDecompiler::train(&train, spec.num_merges, &spec.decompiler, spec.decoder.clone(), spec.seed)?;
    ensure_converged(&decompiler_training, "decompiler")?;
    let decompile = run_decompile_eval(spec, &test, &decompiler)?;

    let (prediction, classifier_training) = match dataset {
        Some(d) => {
            let (classifier, report) = NeuralClassifier::train(&d.train, d.labels.clone(), decompiler.src_bpe.clone(), &spec.classifier, spec.seed)?;
            ensure_converged(&report, "classifier")?;
            (Some(run_prediction_eval(spec, &d, corpus, &decompiler, &classifier)?), Some(report))
        }
        None => (None, None),
    };
    Ok(ExperimentOutcome { decompile, prediction, decompiler_training, classifier_training })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, cwe: u32, variant: Variant, src: &str) -> FunctionPair {
        let mut p = FunctionPair::new(id, CweId::new(cwe).unwrap(), variant, String::new(), src.to_string());
        p.src_norm = Some(src.to_string());
        p.asm_norm = Some(format!("mov eax , {id}"));
        p
    }

    fn corpus(good: usize, bad: usize) -> Corpus {
        let mut pairs = Vec::new();
        for i in 0..good {
            pairs.push(pair(&format!("g{i}"), 190, Variant::Good, "int x ;"));
        }
        for i in 0..bad {
            pairs.push(pair(&format!("b{i}"), 190, Variant::Bad, "int y ;"));
        }
        Corpus::new(pairs)
    }

    #[test]
    fn default_label_space_has_twenty_one_classes() {
        let space = LabelSpace::default();
        assert_eq!(space.n_classes(), 21);
        assert_eq!(space.labels()[0], "190");
        assert_eq!(space.labels()[20], "good");
        let json = serde_json::to_string(&space).unwrap();
        assert_eq!(serde_json::from_str::<LabelSpace>(&json).unwrap(), space);
    }

    #[test]
    fn label_space_rejects_duplicates_and_wrong_sizes() {
        let mut ids: Vec<CweId> = LabelSpace::default().cwe_ids().to_vec();
        ids[1] = ids[0];
        assert!(LabelSpace::new(ids, "good").is_err());
        assert!(LabelSpace::new(vec![CweId::new(1).unwrap()], "good").is_err());
        assert!(serde_json::from_str::<LabelSpace>(r#"{"cwe_ids":[1,2],"good_label":"good"}"#).is_err());
    }

    #[test]
    fn biclass_downsamples_majority() {
        let d = build_biclass_dataset(&corpus(40, 60), 0.2, 7).unwrap();
        assert_eq!(d.train.len() + d.test.len(), 80);
        assert_eq!(d.downsampled.len(), 20);
        assert!(d.downsampled.iter().all(|id| id.starts_with('b')));
        let counts = d.label_counts(&d.train);
        assert!(counts["good"].abs_diff(counts["bad"]) <= 1);
        assert_eq!(d.test.len(), 16);
        d.check_disjoint().unwrap();
    }

    #[test]
    fn biclass_keeps_balanced_input() {
        let d = build_biclass_dataset(&corpus(25, 25), 0.2, 1).unwrap();
        assert!(d.downsampled.is_empty());
        assert_eq!(d.train.len() + d.test.len(), 50);
    }

    #[test]
    fn biclass_needs_both_variants() {
        assert!(matches!(build_biclass_dataset(&corpus(10, 0), 0.2, 0), Err(TaskError::OneClassOnly(Variant::Good))));
        assert!(matches!(build_biclass_dataset(&corpus(0, 3), 0.2, 0), Err(TaskError::OneClassOnly(Variant::Bad))));
    }

    #[test]
    fn balancing_depends_on_seed_only() {
        let c = corpus(10, 30);
        assert_eq!(balance_variants(&c, 3).unwrap().1, balance_variants(&c, 3).unwrap().1);
        assert_ne!(balance_variants(&c, 3).unwrap().1, balance_variants(&c, 4).unwrap().1);
    }

    #[test]
    fn multiclass_labels_and_drops() {
        let space = LabelSpace::default();
        let mut pairs = Vec::new();
        for i in 0..5 {
            pairs.push(pair(&format!("a{i}"), 190, Variant::Bad, "a"));
            pairs.push(pair(&format!("c{i}"), 999, Variant::Good, "c"));
            pairs.push(pair(&format!("d{i}"), 78, Variant::Bad, "d"));
        }
        pairs.push(pair("x", 999, Variant::Bad, "x"));
        let d = build_multiclass_dataset(&Corpus::new(pairs), &space, 0.2, 0).unwrap();
        assert_eq!(d.dropped, vec!["x".to_string()]);
        let all: Vec<&LabeledSample> = d.train.iter().chain(&d.test).collect();
        assert_eq!(all.len(), 15);
        for s in all {
            let expected = match &s.id[..1] {
                "a" => "190",
                "c" => "good",
                _ => "78",
            };
            assert_eq!(d.labels[s.label], expected);
        }
        for label in ["190", "good", "78"] {
            assert_eq!(d.label_counts(&d.test)[label], 1);
        }
    }

    #[test]
    fn multiclass_empty_after_filter() {
        let c = Corpus::new(vec![pair("x", 999, Variant::Bad, "x")]);
        assert!(matches!(build_multiclass_dataset(&c, &LabelSpace::default(), 0.2, 0), Err(TaskError::EmptyAfterFilter { dropped: 1 })));
    }

    #[test]
    fn spec_roundtrip_and_hash() {
        let spec = ExperimentSpec::from_json(r#"{"task":"multiclass","seed":9}"#).unwrap();
        assert_eq!(spec.task, TaskKind::Multiclass);
        assert_eq!(spec.test_fraction, 0.2);
        let again = ExperimentSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(again.hash(), spec.hash());
        assert_eq!(spec.hash().len(), 64);
        let other = ExperimentSpec { seed: 10, ..spec.clone() };
        assert_ne!(other.hash(), spec.hash());
        assert!(ExperimentSpec::from_json(r#"{"test_fraction":1.5}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"decompiler":{"model":{"d_model":10,"n_heads":3}}}"#).is_err());
    }

    #[test]
    fn identity_decompiler_scores_one() {
        let spec = ExperimentSpec::default();
        let c = corpus(3, 3);
        let r = run_decompile_eval(&spec, &c, &IdentityDecompiler).unwrap();
        assert_eq!(r.scores.edit_similarity, 1.0);
        assert_eq!(r.scores.bleu4_mean, 1.0);
        assert_eq!(r.per_pair.len(), 6);
        assert_eq!(r.header.seed, spec.seed);
        assert_eq!(r.header.spec_hash, spec.hash());
        let e = run_decompile_eval(&spec, &c, &EmptyDecompiler).unwrap();
        assert_eq!(e.scores.edit_similarity, 0.0);
        assert!(matches!(run_decompile_eval(&spec, &Corpus::default(), &IdentityDecompiler), Err(TaskError::EmptyTestSet)));
    }

    struct Leaky(Vec<String>);
    impl Decompile for Leaky {
        fn name(&self) -> String {
            "leaky".into()
        }
        fn decompile(&self, _: &FunctionPair) -> Result<String, TaskError> {
            Ok(String::new())
        }
        fn train_ids(&self) -> Option<&[String]> {
            Some(&self.0)
        }
    }

    #[test]
    fn leakage_is_detected() {
        let c = corpus(2, 2);
        let err = run_decompile_eval(&ExperimentSpec::default(), &c, &Leaky(vec!["g1".into()])).unwrap_err();
        assert!(matches!(err, TaskError::Leakage(ids) if ids == ["g1"]));
    }

    fn separable(n: usize) -> Corpus {
        let mut pairs = Vec::new();
        for i in 0..n {
            let (v, marker) = if i % 2 == 0 { (Variant::Good, "safe") } else { (Variant::Bad, "strcpy") };
            let text = format!("void f ( ) {{ int v{} ; {marker} ( buf ) ; }}", i % 5);
            pairs.push(pair(&format!("s{i}"), 121, v, &text));
        }
        Corpus::new(pairs)
    }

    fn small_classifier() -> ModelSpec {
        ModelSpec {
            model: TransformerConfig { d_model: 16, n_heads: 2, n_enc_layers: 1, n_dec_layers: 1, d_ff: 32, max_seq_len: 64, ..TransformerConfig::default() },
            schedule: TrainSchedule { max_steps: 150, batch_size: 8, lr: 3e-3, ..TrainSchedule::default() },
        }
    }

    #[test]
    fn identity_and_empty_decompilers_bracket_prediction() {
        let spec = ExperimentSpec { classifier: small_classifier(), ..ExperimentSpec::default() };
        let c = separable(60);
        let d = build_biclass_dataset(&c, 0.2, 0).unwrap();
        let bpe = train_bpe_on(d.train.iter().map(|s| s.text.as_str()), 50).unwrap();
        let (clf, report) = NeuralClassifier::train(&d.train, d.labels.clone(), bpe, &spec.classifier, 0).unwrap();
        ensure_converged(&report, "classifier").unwrap();
        let ident = run_prediction_eval(&spec, &d, &c, &IdentityDecompiler, &clf).unwrap();
        assert!(ident.decompiled.accuracy >= 0.98, "{}", ident.decompiled.accuracy);
        assert_eq!(ident.accuracy_delta, 0.0);
        let empty = run_prediction_eval(&spec, &d, &c, &EmptyDecompiler, &clf).unwrap();
        assert!((empty.decompiled.accuracy - 0.5).abs() <= 0.1, "{}", empty.decompiled.accuracy);
        assert_eq!(empty.header.label_space, vec!["good", "bad"]);
        assert!(empty.table().contains("empty (decompiled)"));
    }

    #[test]
    fn classifier_train_ids_must_not_overlap_test() {
        let spec = ExperimentSpec { classifier: ModelSpec { schedule: TrainSchedule { max_steps: 1, ..small_classifier().schedule }, ..small_classifier() }, ..ExperimentSpec::default() };
        let c = separable(20);
        let d = build_biclass_dataset(&c, 0.2, 0).unwrap();
        let bpe = train_bpe_on(d.train.iter().map(|s| s.text.as_str()), 10).unwrap();
        let mut all = d.train.clone();
        all.extend(d.test.iter().cloned());
        let (clf, _) = NeuralClassifier::train(&all, d.labels.clone(), bpe, &spec.classifier, 0).unwrap();
        assert!(matches!(run_prediction_eval(&spec, &d, &c, &IdentityDecompiler, &clf), Err(TaskError::Leakage(_))));
    }

    #[test]
    fn experiment_keeps_test_out_of_decompiler_training() {
        let tiny = ModelSpec {
            model: TransformerConfig { d_model: 8, n_heads: 2, n_enc_layers: 1, n_dec_layers: 1, d_ff: 16, max_seq_len: 32, ..TransformerConfig::default() },
            schedule: TrainSchedule { max_steps: 3, batch_size: 4, lr: 1e-3, ..TrainSchedule::default() },
        };
        let spec = ExperimentSpec { num_merges: 20, decompiler: tiny.clone(), classifier: tiny, decoder: DecoderSpec { beam_width: 1, max_len: 8 }, ..ExperimentSpec::default() };
        let c = separable(20);
        let out = run_experiment(&spec, &c).unwrap();
        let p = out.prediction.unwrap();
        assert_eq!(p.header.counts["test"], 4);
        assert_eq!(out.decompile.per_pair.len(), 4);
        let tested: BTreeSet<&str> = out.decompile.per_pair.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(out.decompiler_training.steps, 3);
        assert_eq!(tested.len(), 4);
    }
}
