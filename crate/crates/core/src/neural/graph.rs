//! Reverse-mode autodiff over 2-D tensors. A [`Graph`] records one forward
//! pass; [`Graph::backward`] returns gradients for the parameters it read.

use std::borrow::Cow;
use std::rc::Rc;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{matmul, matmul_at, matmul_bt, softmax_row, Tensor};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Rc<Vec<f64>>),
    Gelu(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Softmax { x: Var },
    Embedding { table: Var, ids: Vec<usize> },
    Cols { x: Var, start: usize },
    Rows { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    WeightedSumRows { x: Var, weights: Vec<f64> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, count: usize },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
}

/// One forward pass. Parameters are borrowed from the store, not copied.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node<'p>>,
    non_finite: Option<String>,
    diagnostics: Vec<String>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self { store, nodes: Vec::new(), non_finite: None, diagnostics: Vec::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Fails if any recorded value was NaN or infinite.
    pub fn check(&self) -> Result<(), NeuralError> {
        match &self.non_finite {
            Some(what) => Err(NeuralError::NonFinite(what.clone())),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, name: &str) -> Var {
        if self.non_finite.is_none() && !value.is_finite() {
            self.non_finite = Some(format!("{name} (node {})", self.nodes.len()));
        }
        self.nodes.push(Node { value: Cow::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, "constant")
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.value(id);
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Param(id) });
        Var(self.nodes.len() - 1)
    }

    pub fn param_named(&mut self, name: &str) -> Var {
        let id = self.store.id(name).unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        self.param(id)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((n, k), (k2, m)) = (self.dims(a), self.dims(b));
        assert_eq!(k, k2, "matmul inner dims");
        let out = matmul(self.value(a).data(), self.value(b).data(), n, k, m);
        self.push(Tensor::matrix(n, m, out), Op::MatMul(a, b), "matmul")
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let ((n, k), (m, k2)) = (self.dims(a), self.dims(b));
        assert_eq!(k, k2, "matmul_bt inner dims");
        let out = matmul_bt(self.value(a).data(), self.value(b).data(), n, k, m);
        self.push(Tensor::matrix(n, m, out), Op::MatMulBt(a, b), "matmul_bt")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add shapes");
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b), "add")
    }

    /// Adds a bias vector to every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (n, m) = self.dims(a);
        assert_eq!(self.value(bias).len(), m, "bias width");
        let mut out = self.value(a).clone();
        let b = self.value(bias).data();
        for r in 0..n {
            for (o, x) in out.row_mut(r).iter_mut().zip(b) {
                *o += x;
            }
        }
        self.push(out, Op::AddRow(a, bias), "add_row")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale_assign(s);
        self.push(out, Op::Scale(a, s), "scale")
    }

    /// Elementwise product with a constant of the same shape (dropout masks).
    pub fn mul_const(&mut self, a: Var, factors: Rc<Vec<f64>>) -> Var {
        let mut out = self.value(a).clone();
        for (o, f) in out.data_mut().iter_mut().zip(factors.iter()) {
            *o *= f;
        }
        self.push(out, Op::MulConst(a, factors), "dropout")
    }

    /// tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())).collect();
        let out = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(out, Op::Gelu(a), "gelu")
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (n, d) = self.dims(x);
        let xv = self.value(x);
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; n * d];
        let mut rstd = vec![0.0; n];
        let mut out = Tensor::zeros(&[n, d]);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = s;
            let o = out.row_mut(r);
            for j in 0..d {
                let h = (row[j] - mean) * s;
                xhat[r * d + j] = h;
                o[j] = h * g[j] + b[j];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd }, "layer_norm")
    }

    /// Row softmax. `allowed` has the input's shape; disallowed entries get
    /// exactly zero weight.
    pub fn softmax(&mut self, x: Var, allowed: Option<&[bool]>) -> Var {
        let (n, m) = self.dims(x);
        let xv = self.value(x);
        let mut out = Tensor::zeros(&[n, m]);
        for r in 0..n {
            let mask = allowed.map(|a| &a[r * m..(r + 1) * m]);
            softmax_row(xv.row(r), mask, out.row_mut(r));
        }
        self.push(out, Op::Softmax { x }, "softmax")
    }

    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let d = t.cols();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(t.row(id));
        }
        self.push(Tensor::matrix(ids.len(), d, data), Op::Embedding { table, ids: ids.to_vec() }, "embedding")
    }

    pub fn cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (n, _) = self.dims(x);
        let xv = self.value(x);
        let mut data = Vec::with_capacity(n * len);
        for r in 0..n {
            data.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        self.push(Tensor::matrix(n, len, data), Op::Cols { x, start }, "cols")
    }

    pub fn rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let d = self.dims(x).1;
        let data = self.value(x).data()[start * d..(start + len) * d].to_vec();
        self.push(Tensor::matrix(len, d, data), Op::Rows { x, start }, "rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let n = self.dims(parts[0]).0;
        let total: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        self.push(Tensor::matrix(n, total, data), Op::ConcatCols(parts.to_vec()), "concat")
    }

    /// `Σ_r w_r x_r` as a 1×d row.
    pub fn weighted_sum_rows(&mut self, x: Var, weights: Vec<f64>) -> Var {
        let (n, d) = self.dims(x);
        assert_eq!(weights.len(), n, "one weight per row");
        let xv = self.value(x);
        let mut out = vec![0.0; d];
        for (r, w) in weights.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(xv.row(r)) {
                *o += w * v;
            }
        }
        self.push(Tensor::row_vector(out), Op::WeightedSumRows { x, weights }, "pool")
    }

    /// Mean token cross-entropy over rows whose target is `Some`. With every
    /// row ignored the loss is 0, the gradient is 0 and a diagnostic is kept.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let (n, v) = self.dims(logits);
        assert_eq!(targets.len(), n, "one target per row");
        let lv = self.value(logits);
        let mut probs = vec![0.0; n * v];
        let mut total = 0.0;
        let mut count = 0;
        for (r, t) in targets.iter().enumerate() {
            let Some(t) = *t else { continue };
            let p = &mut probs[r * v..(r + 1) * v];
            softmax_row(lv.row(r), None, p);
            let row = lv.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
            count += 1;
        }
        if count == 0 {
            self.diagnostics.push("cross-entropy: every position ignored".into());
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let op = Op::CrossEntropy { logits, targets: targets.to_vec(), probs, count };
        self.push(Tensor::filled(&[1, 1], loss), op, "cross_entropy")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    /// Backpropagates `upstream · ∂root` (root must be 1×1).
    pub fn backward(&self, root: Var, upstream: f64) -> Result<Gradients, NeuralError> {
        self.check()?;
        let mut grads: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::filled(self.value(root).shape(), upstream));
        let mut out = Gradients::zeros_like(self.store);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let ((n, k), (_, m)) = (self.dims(*a), self.dims(*b));
                    let ga = matmul_bt(g.data(), self.value(*b).data(), n, m, k);
                    let gb = matmul_at(self.value(*a).data(), g.data(), n, k, m);
                    acc(*a, Tensor::matrix(n, k, ga));
                    acc(*b, Tensor::matrix(k, m, gb));
                }
                Op::MatMulBt(a, b) => {
                    let ((n, k), (m, _)) = (self.dims(*a), self.dims(*b));
                    let ga = matmul(g.data(), self.value(*b).data(), n, m, k);
                    let gb = matmul_at(g.data(), self.value(*a).data(), n, m, k);
                    acc(*a, Tensor::matrix(n, k, ga));
                    acc(*b, Tensor::matrix(m, k, gb));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Tensor::zeros(self.value(*bias).shape());
                    for r in 0..g.rows() {
                        for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(*a, g);
                    acc(*bias, gb);
                }
                Op::Scale(a, s) => {
                    let mut ga = g;
                    ga.scale_assign(*s);
                    acc(*a, ga);
                }
                Op::MulConst(a, factors) => {
                    let mut ga = g;
                    for (o, f) in ga.data_mut().iter_mut().zip(factors.iter()) {
                        *o *= f;
                    }
                    acc(*a, ga);
                }
                Op::Gelu(a) => {
                    let mut ga = g;
                    for (o, &x) in ga.data_mut().iter_mut().zip(self.value(*a).data()) {
                        let u = GELU_C * (x + 0.044715 * x * x * x);
                        let t = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                        *o *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                    }
                    acc(*a, ga);
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let (n, d) = self.dims(*x);
                    let gam = self.value(*gamma).data();
                    let mut gx = Tensor::zeros(&[n, d]);
                    let mut gg = Tensor::zeros(self.value(*gamma).shape());
                    let mut gbeta = Tensor::zeros(self.value(*beta).shape());
                    for r in 0..n {
                        let gr = g.row(r);
                        let h = &xhat[r * d..(r + 1) * d];
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..d {
                            gg.data_mut()[j] += gr[j] * h[j];
                            gbeta.data_mut()[j] += gr[j];
                            let dh = gr[j] * gam[j];
                            sum_dh += dh;
                            sum_dh_h += dh * h[j];
                        }
                        let o = gx.row_mut(r);
                        for j in 0..d {
                            let dh = gr[j] * gam[j];
                            o[j] = rstd[r] * (dh - sum_dh / d as f64 - h[j] * sum_dh_h / d as f64);
                        }
                    }
                    acc(*x, gx);
                    acc(*gamma, gg);
                    acc(*beta, gbeta);
                }
                Op::Softmax { x } => {
                    let y = &self.nodes[i].value;
                    let mut gx = Tensor::zeros(y.shape());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (o, (yv, gv)) in gx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(*x, gx);
                }
                Op::Embedding { table, ids } => {
                    let mut gt = Tensor::zeros(self.value(*table).shape());
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, x) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(*table, gt);
                }
                Op::Cols { x, start } => {
                    let (n, d) = self.dims(*x);
                    let len = g.cols();
                    let mut gx = Tensor::zeros(&[n, d]);
                    for r in 0..n {
                        gx.row_mut(r)[*start..start + len].copy_from_slice(g.row(r));
                    }
                    acc(*x, gx);
                }
                Op::Rows { x, start } => {
                    let (n, d) = self.dims(*x);
                    let mut gx = Tensor::zeros(&[n, d]);
                    gx.data_mut()[start * d..start * d + g.len()].copy_from_slice(g.data());
                    acc(*x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (n, w) = self.dims(p);
                        let mut gp = Tensor::zeros(&[n, w]);
                        for r in 0..n {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        acc(p, gp);
                    }
                }
                Op::WeightedSumRows { x, weights } => {
                    let (n, d) = self.dims(*x);
                    let mut gx = Tensor::zeros(&[n, d]);
                    for (r, w) in weights.iter().enumerate() {
                        for (o, v) in gx.row_mut(r).iter_mut().zip(g.data()) {
                            *o = w * v;
                        }
                    }
                    acc(*x, gx);
                }
                Op::CrossEntropy { logits, targets, probs, count } => {
                    let (n, v) = self.dims(*logits);
                    let mut gl = Tensor::zeros(&[n, v]);
                    if *count > 0 {
                        let scale = g.data()[0] / *count as f64;
                        for (r, t) in targets.iter().enumerate() {
                            let Some(t) = *t else { continue };
                            let o = gl.row_mut(r);
                            for j in 0..v {
                                o[j] = scale * probs[r * v + j];
                            }
                            o[t] -= scale;
                        }
                    }
                    acc(*logits, gl);
                }
            }
        }
        if !out.is_finite() {
            return Err(NeuralError::NonFinite("gradient".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(entries: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::default();
        for (n, t) in entries {
            s.insert(n, t.clone());
        }
        s
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let store = ParamStore::default();
        let mut g = Graph::new(&store);
        let logits = g.constant(Tensor::zeros(&[3, 7]));
        let loss = g.cross_entropy(logits, &[Some(1), Some(4), Some(0)]);
        assert!((g.scalar(loss) - 7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logit_has_near_zero_loss() {
        let store = ParamStore::default();
        let mut g = Graph::new(&store);
        let logits = g.constant(Tensor::matrix(1, 3, vec![0.0, 50.0, 0.0]));
        let loss = g.cross_entropy(logits, &[Some(1)]);
        assert!(g.scalar(loss) < 1e-20);
    }

    #[test]
    fn all_ignored_loss_is_zero_with_zero_gradient() {
        let store = store_with(&[("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]))]);
        let mut g = Graph::new(&store);
        let w = g.param_named("w");
        let loss = g.cross_entropy(w, &[None, None]);
        assert_eq!(g.scalar(loss), 0.0);
        assert_eq!(g.diagnostics().len(), 1);
        let grads = g.backward(loss, 1.0).unwrap();
        assert_eq!(grads.get(0).max_abs(), 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let store = store_with(&[("w", Tensor::matrix(2, 2, vec![1.0, -2.0, 0.5, 4.0]))]);
        let mut g = Graph::new(&store);
        let w = g.param_named("w");
        let h = g.gelu(w);
        let loss = g.cross_entropy(h, &[Some(0), Some(1)]);
        let scaled = g.scale(loss, 0.0);
        let grads = g.backward(scaled, 1.0).unwrap();
        assert_eq!(grads.get(0).max_abs(), 0.0);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let store = store_with(&[("z", Tensor::matrix(1, 3, vec![0.1, 0.2, 0.7]))]);
        let mut g = Graph::new(&store);
        let z = g.param_named("z");
        let loss = g.cross_entropy(z, &[Some(2)]);
        let grads = g.backward(loss, 1.0).unwrap();
        let mut p = [0.0; 3];
        softmax_row(&[0.1, 0.2, 0.7], None, &mut p);
        let expected = [p[0], p[1], p[2] - 1.0];
        for (a, b) in grads.get(0).data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_values_trip_an_error() {
        let store = ParamStore::default();
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::row_vector(vec![f64::INFINITY]));
        let y = g.scale(x, 2.0);
        assert!(matches!(g.check(), Err(NeuralError::NonFinite(_))));
        assert!(g.backward(y, 1.0).is_err());
    }
}
