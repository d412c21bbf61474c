use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{normal, ParamStore};
use super::tensor::Tensor;
use super::NeuralError;
use crate::tokenizer::{BOS_ID, EOS_ID, PAD_ID};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub vocab_src: usize,
    pub vocab_tgt: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Sinusoidal position encodings; off only for permutation tests.
    #[serde(default = "default_true")]
    pub use_positional: bool,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            d_model: 128,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_ff: 512,
            max_seq_len: 512,
            vocab_src: 0,
            vocab_tgt: 0,
            dropout_rate: 0.0,
            seed: 0,
            use_positional: true,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::InvalidConfig(m.to_string()));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.max_seq_len < 2 {
            return bad("max_seq_len must be at least 2");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.d_ff == 0 {
            return bad("d_ff must be positive");
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Training-time dropout source; `None` at inference.
pub struct Dropout {
    pub rate: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    fn apply(&mut self, g: &mut Graph, x: Var) -> Var {
        if self.rate == 0.0 {
            return x;
        }
        let keep = 1.0 - self.rate;
        let n = g.value(x).len();
        let factors: Vec<f64> = (0..n).map(|_| if self.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        g.mul_const(x, Rc::new(factors))
    }
}

fn maybe_dropout(g: &mut Graph, x: Var, dropout: &mut Option<&mut Dropout>) -> Var {
    match dropout {
        Some(d) => d.apply(g, x),
        None => x,
    }
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Init<'_> {
    fn normal(&mut self, name: &str, rows: usize, cols: usize, std: f64) {
        let data = (0..rows * cols).map(|_| std * normal(&mut self.rng)).collect();
        self.store.insert(name, Tensor::matrix(rows, cols, data));
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) {
        self.normal(&format!("{prefix}.w"), fan_in, fan_out, 1.0 / (fan_in as f64).sqrt());
        self.store.insert(&format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
    }

    fn zero_linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) {
        self.store.insert(&format!("{prefix}.w"), Tensor::zeros(&[fan_in, fan_out]));
        self.store.insert(&format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
    }

    fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.store.insert(&format!("{prefix}.g"), Tensor::filled(&[d], 1.0));
        self.store.insert(&format!("{prefix}.b"), Tensor::zeros(&[d]));
    }

    fn attention(&mut self, prefix: &str, d: usize) {
        for p in ["q", "k", "v", "o"] {
            self.linear(&format!("{prefix}.{p}"), d, d);
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, d_ff: usize) {
        self.linear(&format!("{prefix}.ff1"), d, d_ff);
        self.linear(&format!("{prefix}.ff2"), d_ff, d);
    }

    fn encoder(&mut self, cfg: &TransformerConfig) {
        let d = cfg.d_model;
        self.normal("src_embed", cfg.vocab_src, d, 1.0);
        for l in 0..cfg.n_enc_layers {
            let p = format!("enc.{l}");
            self.layer_norm(&format!("{p}.ln1"), d);
            self.attention(&format!("{p}.attn"), d);
            self.layer_norm(&format!("{p}.ln2"), d);
            self.ffn(&p, d, cfg.d_ff);
        }
        self.layer_norm("enc.ln_f", d);
    }
}

/// Sinusoidal position encodings for positions `0..len`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::matrix(len, d, data)
}

fn check_ids(ids: &[usize], vocab: usize, max_len: usize) -> Result<(), NeuralError> {
    if ids.is_empty() {
        return Err(NeuralError::EmptySequence);
    }
    if ids.len() > max_len {
        return Err(NeuralError::SequenceTooLong { len: ids.len(), max: max_len });
    }
    if let Some(&id) = ids.iter().find(|&&id| id >= vocab) {
        return Err(NeuralError::IdOutOfRange { id, vocab });
    }
    Ok(())
}

/// Key-visibility mask (`q_len × k_len`, row-major) for attention.
pub fn attention_mask(q_len: usize, keys: &[usize], causal: bool) -> Vec<bool> {
    let k_len = keys.len();
    let mut allowed = vec![false; q_len * k_len];
    for r in 0..q_len {
        for (c, &id) in keys.iter().enumerate() {
            allowed[r * k_len + c] = id != PAD_ID && (!causal || c <= r);
        }
    }
    allowed
}

fn linear(g: &mut Graph, prefix: &str, x: Var) -> Var {
    let w = g.param_named(&format!("{prefix}.w"));
    let b = g.param_named(&format!("{prefix}.b"));
    let h = g.matmul(x, w);
    g.add_row(h, b)
}

fn layer_norm(g: &mut Graph, prefix: &str, x: Var) -> Var {
    let gamma = g.param_named(&format!("{prefix}.g"));
    let beta = g.param_named(&format!("{prefix}.b"));
    g.layer_norm(x, gamma, beta)
}

/// Attention output plus the per-head weight matrices.
pub struct AttentionOutput {
    pub output: Var,
    pub weights: Vec<Var>,
}

/// Per head `softmax(Q Kᵀ / √d_head)·V` with masked keys at exactly zero
/// weight; heads are concatenated and output-projected. Parameters are
/// read from `{prefix}.{q,k,v,o}.{w,b}`.
pub fn multi_head_attention(g: &mut Graph, prefix: &str, xq: Var, xkv: Var, n_heads: usize, allowed: Option<&[bool]>) -> Result<AttentionOutput, NeuralError> {
    let d = g.value(xq).cols();
    let (k_len, k_width) = (g.value(xkv).rows(), g.value(xkv).cols());
    if d != k_width || n_heads == 0 || !d.is_multiple_of(n_heads) {
        return Err(NeuralError::ShapeMismatch(format!("attention widths {d} and {k_width} with {n_heads} heads")));
    }
    if allowed.is_some_and(|m| m.len() != g.value(xq).rows() * k_len) {
        return Err(NeuralError::ShapeMismatch("attention mask must be q_len × k_len".into()));
    }
    let dh = d / n_heads;
    let q = linear(g, &format!("{prefix}.q"), xq);
    let k = linear(g, &format!("{prefix}.k"), xkv);
    let v = linear(g, &format!("{prefix}.v"), xkv);
    let mut heads = Vec::with_capacity(n_heads);
    let mut weights = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = g.cols(q, h * dh, dh);
        let kh = g.cols(k, h * dh, dh);
        let vh = g.cols(v, h * dh, dh);
        let scores = g.matmul_bt(qh, kh);
        let scaled = g.scale(scores, 1.0 / (dh as f64).sqrt());
        let p = g.softmax(scaled, allowed);
        weights.push(p);
        heads.push(g.matmul(p, vh));
    }
    let concat = if n_heads == 1 { heads[0] } else { g.concat_cols(&heads) };
    Ok(AttentionOutput { output: linear(g, &format!("{prefix}.o"), concat), weights })
}

fn ffn(g: &mut Graph, prefix: &str, x: Var) -> Var {
    let h = linear(g, &format!("{prefix}.ff1"), x);
    let h = g.gelu(h);
    linear(g, &format!("{prefix}.ff2"), h)
}

fn embed(g: &mut Graph, cfg: &TransformerConfig, table: &str, ids: &[usize]) -> Var {
    let t = g.param_named(table);
    let x = g.embedding(t, ids);
    if !cfg.use_positional {
        return x;
    }
    let pe = g.constant(positional_encoding(ids.len(), cfg.d_model));
    g.add(x, pe)
}

/// Encoder stack (pre-LN). Output is `src_len × d_model`; positions holding
/// the pad id are masked as keys everywhere.
pub fn encoder_forward(g: &mut Graph, cfg: &TransformerConfig, src: &[usize], mut dropout: Option<&mut Dropout>) -> Result<Var, NeuralError> {
    check_ids(src, cfg.vocab_src, cfg.max_seq_len)?;
    let mut x = embed(g, cfg, "src_embed", src);
    x = maybe_dropout(g, x, &mut dropout);
    let mask = attention_mask(src.len(), src, false);
    for l in 0..cfg.n_enc_layers {
        let p = format!("enc.{l}");
        let h = layer_norm(g, &format!("{p}.ln1"), x);
        let a = multi_head_attention(g, &format!("{p}.attn"), h, h, cfg.n_heads, Some(&mask))?.output;
        let a = maybe_dropout(g, a, &mut dropout);
        x = g.add(x, a);
        let h = layer_norm(g, &format!("{p}.ln2"), x);
        let f = ffn(g, &p, h);
        let f = maybe_dropout(g, f, &mut dropout);
        x = g.add(x, f);
    }
    let out = layer_norm(g, "enc.ln_f", x);
    g.check()?;
    Ok(out)
}

/// Decoder stack over `tgt_in` (starting with BOS). Returns the final hidden
/// states; [`project_logits`] turns rows into vocabulary scores.
pub fn decoder_forward(
    g: &mut Graph,
    cfg: &TransformerConfig,
    tgt_in: &[usize],
    enc_out: Var,
    src: &[usize],
    mut dropout: Option<&mut Dropout>,
) -> Result<Var, NeuralError> {
    check_ids(tgt_in, cfg.vocab_tgt, cfg.max_seq_len)?;
    let mut x = embed(g, cfg, "tgt_embed", tgt_in);
    x = maybe_dropout(g, x, &mut dropout);
    let self_mask = attention_mask(tgt_in.len(), tgt_in, true);
    let cross_mask = attention_mask(tgt_in.len(), src, false);
    for l in 0..cfg.n_dec_layers {
        let p = format!("dec.{l}");
        let h = layer_norm(g, &format!("{p}.ln1"), x);
        let a = multi_head_attention(g, &format!("{p}.self"), h, h, cfg.n_heads, Some(&self_mask))?.output;
        let a = maybe_dropout(g, a, &mut dropout);
        x = g.add(x, a);
        let h = layer_norm(g, &format!("{p}.ln2"), x);
        let c = multi_head_attention(g, &format!("{p}.cross"), h, enc_out, cfg.n_heads, Some(&cross_mask))?.output;
        let c = maybe_dropout(g, c, &mut dropout);
        x = g.add(x, c);
        let h = layer_norm(g, &format!("{p}.ln3"), x);
        let f = ffn(g, &p, h);
        let f = maybe_dropout(g, f, &mut dropout);
        x = g.add(x, f);
    }
    let out = layer_norm(g, "dec.ln_f", x);
    g.check()?;
    Ok(out)
}

pub fn project_logits(g: &mut Graph, hidden: Var) -> Var {
    linear(g, "out", hidden)
}

/// Teacher-forced token cross-entropy of `tgt` given `src`. The decoder
/// reads `BOS + tgt` and predicts `tgt + EOS`; pad targets are ignored.
/// Returns the loss node and the number of scored positions.
pub fn seq2seq_loss(g: &mut Graph, cfg: &TransformerConfig, src: &[usize], tgt: &[usize], mut dropout: Option<&mut Dropout>) -> Result<(Var, usize), NeuralError> {
    let mut tgt_in = Vec::with_capacity(tgt.len() + 1);
    tgt_in.push(BOS_ID);
    tgt_in.extend_from_slice(tgt);
    let targets: Vec<Option<usize>> = tgt.iter().copied().chain([EOS_ID]).map(|t| (t != PAD_ID).then_some(t)).collect();
    let enc = encoder_forward(g, cfg, src, dropout.as_deref_mut())?;
    let hidden = decoder_forward(g, cfg, &tgt_in, enc, src, dropout)?;
    let logits = project_logits(g, hidden);
    let count = targets.iter().flatten().count();
    let loss = g.cross_entropy(logits, &targets);
    g.check()?;
    Ok((loss, count))
}

/// Encoder, mean-pool over non-pad positions, linear head: `1 × n_classes`.
pub fn classifier_logits(g: &mut Graph, cfg: &TransformerConfig, src: &[usize], dropout: Option<&mut Dropout>) -> Result<Var, NeuralError> {
    let h = encoder_forward(g, cfg, src, dropout)?;
    let live = src.iter().filter(|&&id| id != PAD_ID).count().max(1) as f64;
    let weights = src.iter().map(|&id| if id == PAD_ID { 0.0 } else { 1.0 / live }).collect();
    let pooled = g.weighted_sum_rows(h, weights);
    Ok(linear(g, "head", pooled))
}

/// Class cross-entropy for one sample.
pub fn classifier_loss(g: &mut Graph, cfg: &TransformerConfig, n_classes: usize, src: &[usize], label: usize, dropout: Option<&mut Dropout>) -> Result<Var, NeuralError> {
    if label >= n_classes {
        return Err(NeuralError::IdOutOfRange { id: label, vocab: n_classes });
    }
    let logits = classifier_logits(g, cfg, src, dropout)?;
    let loss = g.cross_entropy(logits, &[Some(label)]);
    g.check()?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub config: TransformerConfig,
    pub params: ParamStore,
}

impl Seq2SeqModel {
    pub fn new(config: TransformerConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        if config.vocab_src == 0 || config.vocab_tgt == 0 || config.n_enc_layers == 0 || config.n_dec_layers == 0 {
            return Err(NeuralError::InvalidConfig("seq2seq needs both vocabularies and at least one layer per stack".into()));
        }
        let mut params = ParamStore::default();
        let mut init = Init { store: &mut params, rng: ChaCha8Rng::seed_from_u64(config.seed) };
        init.encoder(&config);
        let d = config.d_model;
        init.normal("tgt_embed", config.vocab_tgt, d, 1.0);
        for l in 0..config.n_dec_layers {
            let p = format!("dec.{l}");
            init.layer_norm(&format!("{p}.ln1"), d);
            init.attention(&format!("{p}.self"), d);
            init.layer_norm(&format!("{p}.ln2"), d);
            init.attention(&format!("{p}.cross"), d);
            init.layer_norm(&format!("{p}.ln3"), d);
            init.ffn(&p, d, config.d_ff);
        }
        init.layer_norm("dec.ln_f", d);
        // zero head: the untrained model predicts the uniform distribution
        init.zero_linear("out", d, config.vocab_tgt);
        Ok(Self { config, params })
    }

    /// See [`seq2seq_loss`]; the graph must read this model's parameters.
    pub fn loss(&self, g: &mut Graph, src: &[usize], tgt: &[usize], dropout: Option<&mut Dropout>) -> Result<(Var, usize), NeuralError> {
        seq2seq_loss(g, &self.config, src, tgt, dropout)
    }

    /// Logits for every position of `tgt_in`.
    pub fn logits(&self, src: &[usize], tgt_in: &[usize]) -> Result<Tensor, NeuralError> {
        let mut g = Graph::new(&self.params);
        let enc = encoder_forward(&mut g, &self.config, src, None)?;
        let hidden = decoder_forward(&mut g, &self.config, tgt_in, enc, src, None)?;
        let logits = project_logits(&mut g, hidden);
        g.check()?;
        Ok(g.value(logits).clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub config: TransformerConfig,
    pub n_classes: usize,
    pub params: ParamStore,
}

impl ClassifierModel {
    pub fn new(config: TransformerConfig, n_classes: usize) -> Result<Self, NeuralError> {
        config.validate()?;
        if config.vocab_src == 0 || config.n_enc_layers == 0 || n_classes < 2 {
            return Err(NeuralError::InvalidConfig("classifier needs a vocabulary, an encoder layer and two classes".into()));
        }
        let mut params = ParamStore::default();
        let mut init = Init { store: &mut params, rng: ChaCha8Rng::seed_from_u64(config.seed) };
        init.encoder(&config);
        init.zero_linear("head", config.d_model, n_classes);
        Ok(Self { config, n_classes, params })
    }

    pub fn forward(&self, g: &mut Graph, src: &[usize], dropout: Option<&mut Dropout>) -> Result<Var, NeuralError> {
        classifier_logits(g, &self.config, src, dropout)
    }

    pub fn loss(&self, g: &mut Graph, src: &[usize], label: usize, dropout: Option<&mut Dropout>) -> Result<Var, NeuralError> {
        classifier_loss(g, &self.config, self.n_classes, src, label, dropout)
    }

    pub fn class_logits(&self, src: &[usize]) -> Result<Vec<f64>, NeuralError> {
        let mut g = Graph::new(&self.params);
        let logits = self.forward(&mut g, src, None)?;
        g.check()?;
        Ok(g.value(logits).data().to_vec())
    }

    pub fn predict(&self, src: &[usize]) -> Result<usize, NeuralError> {
        let logits = self.class_logits(src)?;
        Ok(Tensor::row_vector(logits).argmax_row(0))
    }
}

/// Pure cross-entropy: mean of `-log softmax(logits)[target]` over rows whose
/// target differs from `ignore_id`, and its gradient w.r.t. the logits.
pub fn cross_entropy_loss(logits: &Tensor, targets: &[usize], ignore_id: usize) -> (f64, Tensor, Vec<String>) {
    let mut store = ParamStore::default();
    let id = store.insert("logits", logits.clone());
    let mut g = Graph::new(&store);
    let x = g.param(id);
    let t: Vec<Option<usize>> = targets.iter().map(|&t| (t != ignore_id).then_some(t)).collect();
    let loss = g.cross_entropy(x, &t);
    let value = g.scalar(loss);
    let grads = g.backward(loss, 1.0).expect("finite logits");
    (value, grads.get(id).clone(), g.diagnostics().to_vec())
}

/// Denominator floor for gradient-check relative errors. Central differences
/// at h = 1e-5 carry about 1e-11 absolute roundoff, so smaller gradients
/// cannot be resolved relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub scalars_checked: usize,
}

/// Compares analytic gradients of `loss` with central differences over every
/// scalar of every parameter. Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check<F>(params: &ParamStore, h: f64, floor: f64, loss: F) -> Result<GradCheckReport, NeuralError>
where
    F: for<'p> Fn(&mut Graph<'p>) -> Result<Var, NeuralError>,
{
    let analytic = {
        let mut g = Graph::new(params);
        let root = loss(&mut g)?;
        g.backward(root, 1.0)?
    };
    let eval = |p: &ParamStore| -> Result<f64, NeuralError> {
        let mut g = Graph::new(p);
        let root = loss(&mut g)?;
        Ok(g.scalar(root))
    };
    let mut work = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_param: String::new(), scalars_checked: 0 };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for (id, name) in names.iter().enumerate() {
        for j in 0..params.value(id).len() {
            let orig = params.value(id).data()[j];
            work.value_mut(id).data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.get(id).data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.scalars_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = format!("{name}[{j}]");
            }
        }
    }
    Ok(report)
}
