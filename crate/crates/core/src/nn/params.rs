use std::collections::BTreeMap;

use rand::Rng;

use super::{NnError, Tensor};
use crate::seed;

/// Named parameters with matching gradient buffers.
///
/// Every initializer draws from a stream named after the parameter, so the
/// initial values depend only on `rng_seed` and the name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    rng_seed: u64,
    values: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new(rng_seed: u64) -> Self {
        ParameterSet {
            rng_seed,
            values: BTreeMap::new(),
            grads: BTreeMap::new(),
        }
    }

    /// Rebuilds a set from stored values with zeroed gradients.
    pub fn from_values(rng_seed: u64, values: BTreeMap<String, Tensor>) -> Self {
        let grads = values
            .iter()
            .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
            .collect();
        ParameterSet {
            rng_seed,
            values,
            grads,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        self.grads.insert(name.to_string(), Tensor::zeros(value.shape()));
        self.values.insert(name.to_string(), value);
    }

    fn init_with(&mut self, name: &str, shape: &[usize], mut draw: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> f64) {
        let mut rng = seed::rng(self.rng_seed, &format!("param/{name}"));
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| draw(&mut rng)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data).expect("shape product"));
    }

    pub fn init_uniform(&mut self, name: &str, shape: &[usize], bound: f64) {
        self.init_with(name, shape, |r| r.gen_range(-bound..=bound));
    }

    /// Glorot/Xavier uniform: bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn init_glorot(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize) {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.init_uniform(name, shape, bound);
    }

    pub fn init_constant(&mut self, name: &str, shape: &[usize], value: f64) {
        self.init_with(name, shape, |_| value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.values
            .get(name)
            .ok_or_else(|| NnError::MissingParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        self.values
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParameter(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        self.grads
            .get(name)
            .ok_or_else(|| NnError::MissingParameter(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn values(&self) -> &BTreeMap<String, Tensor> {
        &self.values
    }

    pub fn into_values(self) -> BTreeMap<String, Tensor> {
        self.values
    }

    pub fn zero_grads(&mut self) {
        self.grads.values_mut().for_each(|g| g.fill(0.0));
    }

    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), NnError> {
        for (name, g) in &grads.0 {
            let slot = self
                .grads
                .get_mut(name)
                .ok_or_else(|| NnError::MissingParameter(name.clone()))?;
            if slot.shape() != g.shape() {
                return Err(NnError::Shape(format!("gradient shape mismatch for {name}")));
            }
            slot.add_assign(g);
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, k: f64) {
        self.grads.values_mut().for_each(|g| g.scale(k));
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|g| g.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) {
        let norm = self.grad_norm();
        if norm > max_norm && norm.is_finite() {
            self.scale_grads(max_norm / norm);
        }
    }
}

/// Gradients of the parameters reached by one backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients(pub BTreeMap<String, Tensor>);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }
}

/// Adam moment estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn steps(&self) -> u64 {
        self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from the accumulated gradients.
pub fn adam_step(params: &mut ParameterSet, state: &mut AdamState, config: AdamConfig) {
    let AdamConfig {
        learning_rate,
        betas: (b1, b2),
        epsilon,
    } = config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, value) in params.values.iter_mut() {
        let grad = params.grads[name].data();
        let m = state.first.entry(name.clone()).or_insert_with(|| vec![0.0; grad.len()]);
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (((p, &g), m), v) in value
            .data_mut()
            .iter_mut()
            .zip(grad)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_a_function_of_seed_and_name() {
        let mut a = ParameterSet::new(3);
        a.init_uniform("w", &[4, 4], 0.08);
        a.init_glorot("v", &[2, 3], 3, 2);
        let mut b = ParameterSet::new(3);
        b.init_glorot("v", &[2, 3], 3, 2);
        b.init_uniform("w", &[4, 4], 0.08);
        assert_eq!(a, b);
        assert!(a.get("w").unwrap().data().iter().all(|v| v.abs() <= 0.08));
        let mut c = ParameterSet::new(4);
        c.init_uniform("w", &[4, 4], 0.08);
        assert_ne!(a.get("w").unwrap(), c.get("w").unwrap());
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = ParameterSet::new(0);
        p.init_uniform("w", &[3], 1.0);
        let before = p.clone();
        let mut s = AdamState::default();
        adam_step(&mut p, &mut s, AdamConfig::default());
        assert_eq!(p.get("w").unwrap(), before.get("w").unwrap());
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = ParameterSet::new(0);
        p.insert("w", Tensor::scalar(2.0));
        p.accumulate(&Gradients([("w".to_string(), Tensor::scalar(1.0))].into()))
            .unwrap();
        let mut s = AdamState::default();
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        adam_step(&mut p, &mut s, cfg);
        // m̂ = 1, v̂ = 1  ⇒  Δ = 0.1 / (1 + 1e-8)
        let expected = 2.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut p = ParameterSet::new(0);
        p.insert("w", Tensor::vector(vec![0.0, 0.0]));
        p.accumulate(&Gradients([("w".to_string(), Tensor::vector(vec![3.0, 4.0]))].into()))
            .unwrap();
        p.clip_grad_norm(1.0);
        assert!((p.grad_norm() - 1.0).abs() < 1e-12);
    }
}
