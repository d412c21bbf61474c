use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NeuralError;

pub type ParamId = usize;

/// Named parameters in registration order. Optimizer state, gradients and
/// checkpoints all follow this order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn insert(&mut self, name: &str, value: Tensor) -> ParamId {
        let (id, previous) = self.params.insert_full(name.to_string(), value);
        assert!(previous.is_none(), "parameter `{name}` registered twice");
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.get_index_of(name)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.params.iter().map(|(n, t)| NamedTensor { name: n.clone(), tensor: t.clone() }).collect()
    }

    /// Overwrites values from a checkpoint. Names and shapes must match
    /// exactly, in order.
    pub fn load_named(&mut self, named: Vec<NamedTensor>) -> Result<(), NeuralError> {
        if named.len() != self.params.len() {
            return Err(NeuralError::Checkpoint(format!("{} tensors, model has {}", named.len(), self.params.len())));
        }
        for (slot, entry) in self.params.iter_mut().zip(named) {
            if slot.0 != &entry.name || slot.1.shape() != entry.tensor.shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "expected {} {:?}, found {} {:?}",
                    slot.0,
                    slot.1.shape(),
                    entry.name,
                    entry.tensor.shape()
                )));
            }
            *slot.1 = entry.tensor;
        }
        Ok(())
    }

    /// Replaces every value with N(0, std²) noise; used by gradient checks
    /// so no gradient is trivially zero.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, std: f64) {
        for t in self.params.values_mut() {
            for x in t.data_mut() {
                *x = std * normal(rng);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    #[serde(flatten)]
    pub tensor: Tensor,
}

/// Standard normal sample (Box-Muller).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One gradient tensor per parameter, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { grads: store.params.values().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id]
    }

    pub fn accumulate(&mut self, id: ParamId, delta: &Tensor) {
        self.grads[id].add_assign(delta);
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            g.scale_assign(s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || store.params.values().map(|t| Tensor::zeros(t.shape())).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(state: &mut AdamState, store: &mut ParamStore, grads: &Gradients) -> Result<(), NeuralError> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(NeuralError::ShapeMismatch(format!("{} gradients for {} parameters", grads.len(), store.len())));
    }
    for (id, g) in grads.grads.iter().enumerate() {
        if g.shape() != store.value(id).shape() {
            return Err(NeuralError::ShapeMismatch(format!("gradient {id} has shape {:?}", g.shape())));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    for (id, g) in grads.grads.iter().enumerate() {
        let (m, v) = (state.m[id].data_mut(), state.v[id].data_mut());
        let p = store.value_mut(id).data_mut();
        for j in 0..p.len() {
            let gj = g.data()[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::default();
        s.insert("a", Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]));
        s.insert("b", Tensor::row_vector(vec![-1.0]));
        s
    }

    fn grads(values: [&[f64]; 2]) -> Gradients {
        Gradients { grads: vec![Tensor::matrix(1, 3, values[0].to_vec()), Tensor::row_vector(values[1].to_vec())] }
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut s = store();
        let mut state = AdamState::new(&s, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        let g = grads([&[0.5, -2.0, 0.0], &[1e-3]]);
        adam_step(&mut state, &mut s, &g).unwrap();
        let eps = 1e-8;
        let expected = [1.0 - 0.1 * 0.5 / (0.5 + eps), 2.0 + 0.1 * 2.0 / (2.0 + eps), 3.0];
        for (a, b) in s.get("a").unwrap().data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert!((s.get("b").unwrap().data()[0] - (-1.0 - 0.1 * 1e-3 / (1e-3 + eps))).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut s = store();
        let before = s.clone();
        let mut state = AdamState::new(&s, AdamConfig::default());
        adam_step(&mut state, &mut s, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = store();
        let mut state = AdamState::new(&s, AdamConfig::default());
        let bad = Gradients { grads: vec![Tensor::row_vector(vec![1.0])] };
        assert!(matches!(adam_step(&mut state, &mut s, &bad), Err(NeuralError::ShapeMismatch(_))));
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut g = grads([&[3.0, 0.0, 0.0], &[4.0]]);
        assert_eq!(g.clip(1.0), 5.0);
        assert!((g.norm() - 1.0).abs() < 1e-15);
    }
}
