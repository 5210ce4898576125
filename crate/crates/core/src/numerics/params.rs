use std::collections::HashMap;

use super::{NumericsError, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Param {
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    pub(crate) entries: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.entries.iter().map(|(p, g)| (*p, g.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
    step: u64,
    pending: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NumericsError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        let n = value.len();
        self.params.push(Param {
            name: name.clone(),
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        self.by_name.insert(name, id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    /// Total number of scalar weights.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Adds a backward pass's gradients into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.iter() {
            for (acc, x) in self.params[id.0].grad.iter_mut().zip(g) {
                *acc += x;
            }
        }
        self.pending = true;
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.pending = false;
    }

    /// One bias-corrected Adam update, then clears the gradients.
    pub fn adam_step(&mut self, lr: f64, cfg: &AdamConfig) -> Result<()> {
        if !self.pending {
            return Err(NumericsError::EmptyGradients);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for p in &mut self.params {
            let value = p.value.data_mut();
            let state = p.grad.iter_mut().zip(p.m.iter_mut()).zip(p.v.iter_mut());
            for (w, ((g, m), v)) in value.iter_mut().zip(state) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * *g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * *g * *g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w -= lr * mhat / (vhat.sqrt() + cfg.eps);
                *g = 0.0;
            }
        }
        self.pending = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads(id: ParamId, g: Vec<f64>) -> Gradients {
        Gradients {
            entries: vec![(id, g)],
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()).unwrap();
        s.accumulate(&grads(id, vec![0.0; 3]));
        s.adam_step(1e-3, &AdamConfig::default()).unwrap();
        assert_eq!(s.value(id).data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(0.0)).unwrap();
        let cfg = AdamConfig::default();
        s.accumulate(&grads(id, vec![1.0]));
        s.adam_step(1e-4, &cfg).unwrap();
        let expected = -1e-4 / (1.0 + cfg.eps);
        assert!((s.value(id).item() - expected).abs() < 1e-18);
        assert_eq!(s.get(id).grad(), &[0.0]);
    }

    #[test]
    fn step_without_gradients_fails() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(0.0)).unwrap();
        assert!(matches!(
            s.adam_step(1e-3, &AdamConfig::default()),
            Err(NumericsError::EmptyGradients)
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(0.0)).unwrap();
        assert!(s.add("w", Tensor::scalar(0.0)).is_err());
    }
}
