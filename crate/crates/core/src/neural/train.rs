use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::model::{classifier_loss, decoder_forward, encoder_forward, project_logits, seq2seq_loss, ClassifierModel, Dropout, Seq2SeqModel, TransformerConfig};
use super::params::{adam_step, AdamConfig, AdamState, Gradients, NamedTensor, ParamStore};
use super::tensor::Tensor;
use super::NeuralError;
use crate::tokenizer::{BOS_ID, EOS_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub max_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    /// Stop after this many steps without the best step loss improving by
    /// `min_delta`.
    pub patience: Option<usize>,
    pub min_delta: f64,
    /// Stop once the mean loss over the last epoch's worth of steps is below
    /// this value.
    pub target_loss: Option<f64>,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self { max_steps: 1000, batch_size: 8, lr: 3e-4, clip_norm: 1.0, patience: None, min_delta: 1e-4, target_loss: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    Plateau,
    TargetLoss,
    /// Loss or gradients went non-finite; parameters are those before `step`.
    Diverged { step: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<LossPoint>,
    pub steps: usize,
    pub stop: StopReason,
    /// Mean per-token (or per-sample) loss over the whole training set after
    /// training, without dropout. Absent after divergence.
    pub final_loss: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl TrainReport {
    pub fn diverged(&self) -> bool {
        matches!(self.stop, StopReason::Diverged { .. })
    }
}

pub fn loss_csv(curve: &[LossPoint]) -> String {
    let mut out = String::from("step,loss\n");
    for p in curve {
        let _ = writeln!(out, "{},{}", p.step, p.loss);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seq2SeqExample {
    pub id: String,
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

impl Seq2SeqExample {
    /// Truncates to what the model accepts: `max_seq_len` source ids and
    /// `max_seq_len - 1` target ids (room for BOS/EOS). Returns a diagnostic
    /// when anything was cut.
    pub fn fitted(id: String, mut src: Vec<usize>, mut tgt: Vec<usize>, cfg: &TransformerConfig) -> (Self, Option<String>) {
        let (s, t) = (src.len(), tgt.len());
        src.truncate(cfg.max_seq_len);
        tgt.truncate(cfg.max_seq_len - 1);
        let note = (src.len() < s || tgt.len() < t).then(|| format!("{id}: truncated source {s}→{} and target {t}→{}", src.len(), tgt.len()));
        (Self { id, src, tgt }, note)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassExample {
    pub id: String,
    pub src: Vec<usize>,
    pub label: usize,
}

impl ClassExample {
    pub fn fitted(id: String, mut src: Vec<usize>, label: usize, cfg: &TransformerConfig) -> (Self, Option<String>) {
        let n = src.len();
        src.truncate(cfg.max_seq_len);
        let note = (src.len() < n).then(|| format!("{id}: truncated source {n}→{}", src.len()));
        (Self { id, src, label }, note)
    }
}

/// Deterministic epoch-shuffled batches.
struct Batcher {
    n: usize,
    batch: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl Batcher {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut b = Self { n, batch: batch.max(1), seed, epoch: 0, order: Vec::new(), cursor: 0 };
        b.reshuffle();
        b
    }

    fn reshuffle(&mut self) {
        self.order = (0..self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ self.epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch);
        while out.len() < self.batch.min(self.n) {
            if self.cursor == self.n {
                self.epoch += 1;
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Shared optimization loop. `weight(i)` is the sample's share of the batch
/// loss; `grad(params, i, upstream, dropout)` returns (loss, gradients).
fn optimize<W, G>(params: &mut ParamStore, n: usize, schedule: &TrainSchedule, dropout_rate: f64, weight: W, grad: G) -> Result<(Vec<LossPoint>, StopReason, usize), NeuralError>
where
    W: Fn(usize) -> f64,
    G: Fn(&ParamStore, usize, f64, Option<&mut Dropout>) -> Result<(f64, Gradients), NeuralError>,
{
    if n == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    let mut adam = AdamState::new(params, AdamConfig { lr: schedule.lr, ..AdamConfig::default() });
    let mut batches = Batcher::new(n, schedule.batch_size, schedule.seed);
    let steps_per_epoch = n.div_ceil(batches.batch);
    let mut curve = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;

    for step in 0..schedule.max_steps {
        let batch = batches.next_batch();
        let total_weight: f64 = batch.iter().map(|&i| weight(i)).sum();
        let mut dropout = (dropout_rate > 0.0).then(|| Dropout { rate: dropout_rate, rng: ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(step as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)) });
        let mut sum = Gradients::zeros_like(params);
        let mut loss = 0.0;
        let mut failure = None;
        for &i in &batch {
            let share = weight(i) / total_weight;
            match grad(params, i, share, dropout.as_mut()) {
                Ok((l, g)) => {
                    loss += share * l;
                    sum.add(&g);
                }
                Err(NeuralError::NonFinite(what)) => {
                    failure = Some(format!("non-finite {what}"));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failure.is_none() && !(loss.is_finite() && sum.is_finite()) {
            failure = Some(format!("non-finite loss {loss}"));
        }
        if let Some(message) = failure {
            return Ok((curve, StopReason::Diverged { step, message }, step));
        }
        sum.clip(schedule.clip_norm);
        let snapshot = params.clone();
        adam_step(&mut adam, params, &sum)?;
        if params.iter().any(|(_, t)| !t.is_finite()) {
            *params = snapshot;
            return Ok((curve, StopReason::Diverged { step, message: "non-finite parameters".into() }, step));
        }
        curve.push(LossPoint { step, loss });

        if let Some(target) = schedule.target_loss {
            let window = &curve[curve.len().saturating_sub(steps_per_epoch)..];
            if curve.len() >= steps_per_epoch && window.iter().map(|p| p.loss).sum::<f64>() / (window.len() as f64) < target {
                return Ok((curve, StopReason::TargetLoss, step + 1));
            }
        }
        if loss < best - schedule.min_delta {
            best = loss;
            since_best = 0;
        } else {
            since_best += 1;
            if schedule.patience.is_some_and(|p| since_best >= p) {
                return Ok((curve, StopReason::Plateau, step + 1));
            }
        }
    }
    Ok((curve, StopReason::MaxSteps, schedule.max_steps))
}

/// Token-weighted mean teacher-forced loss over `data`.
pub fn seq2seq_dataset_loss(model: &Seq2SeqModel, data: &[Seq2SeqExample]) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for ex in data {
        let mut g = Graph::new(&model.params);
        let (loss, count) = model.loss(&mut g, &ex.src, &ex.tgt, None)?;
        total += g.scalar(loss) * count as f64;
        tokens += count;
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Teacher-forced training. Batch loss is the mean over all target tokens in
/// the batch.
pub fn train_seq2seq(model: &mut Seq2SeqModel, data: &[Seq2SeqExample], schedule: &TrainSchedule) -> Result<TrainReport, NeuralError> {
    let cfg = model.config.clone();
    let weight = |i: usize| (data[i].tgt.len() + 1) as f64;
    let grad = |p: &ParamStore, i: usize, up: f64, d: Option<&mut Dropout>| -> Result<(f64, Gradients), NeuralError> {
        let mut g = Graph::new(p);
        let (loss, _) = seq2seq_loss(&mut g, &cfg, &data[i].src, &data[i].tgt, d)?;
        Ok((g.scalar(loss), g.backward(loss, up)?))
    };
    let (curve, stop, steps) = optimize(&mut model.params, data.len(), schedule, cfg.dropout_rate, weight, grad)?;
    let final_loss = if matches!(stop, StopReason::Diverged { .. }) { None } else { Some(seq2seq_dataset_loss(model, data)?) };
    Ok(TrainReport { curve, steps, stop, final_loss, diagnostics: Vec::new() })
}

pub fn classifier_dataset_loss(model: &ClassifierModel, data: &[ClassExample]) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for ex in data {
        let mut g = Graph::new(&model.params);
        let loss = model.loss(&mut g, &ex.src, ex.label, None)?;
        total += g.scalar(loss);
    }
    Ok(if data.is_empty() { 0.0 } else { total / data.len() as f64 })
}

/// Class cross-entropy training; batch loss is the mean over samples.
pub fn train_classifier(model: &mut ClassifierModel, data: &[ClassExample], schedule: &TrainSchedule) -> Result<TrainReport, NeuralError> {
    let (cfg, n_classes) = (model.config.clone(), model.n_classes);
    if let Some(ex) = data.iter().find(|e| e.label >= n_classes) {
        return Err(NeuralError::IdOutOfRange { id: ex.label, vocab: n_classes });
    }
    let grad = |p: &ParamStore, i: usize, up: f64, d: Option<&mut Dropout>| -> Result<(f64, Gradients), NeuralError> {
        let mut g = Graph::new(p);
        let loss = classifier_loss(&mut g, &cfg, n_classes, &data[i].src, data[i].label, d)?;
        Ok((g.scalar(loss), g.backward(loss, up)?))
    };
    let (curve, stop, steps) = optimize(&mut model.params, data.len(), schedule, model.config.dropout_rate, |_| 1.0, grad)?;
    let final_loss = if matches!(stop, StopReason::Diverged { .. }) { None } else { Some(classifier_dataset_loss(model, data)?) };
    Ok(TrainReport { curve, steps, stop, final_loss, diagnostics: Vec::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Generated ids without BOS/EOS.
    pub tokens: Vec<usize>,
    pub sum_log_prob: f64,
    /// Number of scored predictions (tokens plus EOS when emitted).
    pub steps: usize,
    pub finished: bool,
}

impl Hypothesis {
    pub fn mean_log_prob(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.sum_log_prob / self.steps as f64
        }
    }
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

/// Encoder output reused across decoding steps.
struct Encoded<'m> {
    model: &'m Seq2SeqModel,
    src: Vec<usize>,
    enc: Tensor,
}

impl<'m> Encoded<'m> {
    fn new(model: &'m Seq2SeqModel, src: &[usize]) -> Result<Self, NeuralError> {
        let mut g = Graph::new(&model.params);
        let enc = encoder_forward(&mut g, &model.config, src, None)?;
        Ok(Self { model, src: src.to_vec(), enc: g.value(enc).clone() })
    }

    /// Log-probabilities of the next token after `BOS + prefix`.
    fn next_log_probs(&self, prefix: &[usize]) -> Result<Vec<f64>, NeuralError> {
        let mut tgt_in = Vec::with_capacity(prefix.len() + 1);
        tgt_in.push(BOS_ID);
        tgt_in.extend_from_slice(prefix);
        let mut g = Graph::new(&self.model.params);
        let enc = g.constant(self.enc.clone());
        let hidden = decoder_forward(&mut g, &self.model.config, &tgt_in, enc, &self.src, None)?;
        let last = g.rows(hidden, tgt_in.len() - 1, 1);
        let logits = project_logits(&mut g, last);
        g.check()?;
        Ok(log_softmax(g.value(logits).data()))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn greedy(enc: &Encoded, max_len: usize) -> Result<Hypothesis, NeuralError> {
    let mut hyp = Hypothesis { tokens: Vec::new(), sum_log_prob: 0.0, steps: 0, finished: false };
    while hyp.tokens.len() < max_len {
        let lp = enc.next_log_probs(&hyp.tokens)?;
        let t = argmax(&lp);
        hyp.sum_log_prob += lp[t];
        hyp.steps += 1;
        if t == EOS_ID {
            hyp.finished = true;
            break;
        }
        hyp.tokens.push(t);
    }
    Ok(hyp)
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.mean_log_prob().total_cmp(&a.mean_log_prob()).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Greedy (`beam_width == 1`) or beam decoding ranked by mean log-prob.
/// The beam result is the best of the final beam and the greedy path, so it
/// never scores below greedy. At most `max_len` tokens are produced, and
/// never more than the model's position budget allows.
pub fn decode_hypothesis(model: &Seq2SeqModel, src: &[usize], beam_width: usize, max_len: usize) -> Result<Hypothesis, NeuralError> {
    let enc = Encoded::new(model, src)?;
    let max_len = max_len.min(model.config.max_seq_len - 1);
    let greedy_hyp = greedy(&enc, max_len)?;
    if beam_width <= 1 {
        return Ok(greedy_hyp);
    }
    let mut beam = vec![Hypothesis { tokens: Vec::new(), sum_log_prob: 0.0, steps: 0, finished: false }];
    while beam.iter().any(|h| !h.finished && h.tokens.len() < max_len) {
        let mut candidates = Vec::new();
        for h in &beam {
            if h.finished || h.tokens.len() >= max_len {
                candidates.push(h.clone());
                continue;
            }
            let lp = enc.next_log_probs(&h.tokens)?;
            let mut order: Vec<usize> = (0..lp.len()).collect();
            order.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
            for &t in order.iter().take(beam_width) {
                let mut next = h.clone();
                next.sum_log_prob += lp[t];
                next.steps += 1;
                if t == EOS_ID {
                    next.finished = true;
                } else {
                    next.tokens.push(t);
                }
                candidates.push(next);
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(beam_width);
        beam = candidates;
    }
    beam.push(greedy_hyp);
    beam.sort_by(rank);
    Ok(beam.swap_remove(0))
}

pub fn decode(model: &Seq2SeqModel, src: &[usize], beam_width: usize, max_len: usize) -> Result<Vec<usize>, NeuralError> {
    Ok(decode_hypothesis(model, src, beam_width, max_len)?.tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Seq2seq,
    Classifier,
}

pub const CHECKPOINT_FORMAT: &str = "bindecomp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Single-file JSON checkpoint. Floats are written with round-trip
/// precision, so a loaded model reproduces outputs bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub config: TransformerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    /// Class names for classifiers, in head order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// Ids of the pairs the model was trained on.
    #[serde(default)]
    pub train_ids: Vec<String>,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_seq2seq(model: &Seq2SeqModel, train_ids: Vec<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: ModelKind::Seq2seq,
            config: model.config.clone(),
            n_classes: None,
            labels: Vec::new(),
            train_ids,
            params: model.params.to_named(),
        }
    }

    pub fn from_classifier(model: &ClassifierModel, labels: Vec<String>, train_ids: Vec<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: ModelKind::Classifier,
            config: model.config.clone(),
            n_classes: Some(model.n_classes),
            labels,
            train_ids,
            params: model.params.to_named(),
        }
    }

    fn check_header(&self, kind: ModelKind) -> Result<(), NeuralError> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        if self.kind != kind {
            return Err(NeuralError::Checkpoint(format!("expected a {kind:?} checkpoint, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn into_seq2seq(self) -> Result<Seq2SeqModel, NeuralError> {
        self.check_header(ModelKind::Seq2seq)?;
        let mut model = Seq2SeqModel::new(self.config)?;
        model.params.load_named(self.params)?;
        Ok(model)
    }

    pub fn into_classifier(self) -> Result<ClassifierModel, NeuralError> {
        self.check_header(ModelKind::Classifier)?;
        let n = self.n_classes.ok_or_else(|| NeuralError::Checkpoint("classifier checkpoint without n_classes".into()))?;
        let mut model = ClassifierModel::new(self.config, n)?;
        model.params.load_named(self.params)?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_json()).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))
    }
}
