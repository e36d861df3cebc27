use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Real, Tensor};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: BTreeMap<String, Vec<T>>,
    pub second: BTreeMap<String, Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    /// One bias-corrected update of every parameter that has a gradient.
    /// Parameters without an entry in `grads` are left untouched.
    pub fn step(
        &mut self,
        params: &mut BTreeMap<String, Tensor<T>>,
        grads: &BTreeMap<String, Vec<T>>,
    ) -> Result<()> {
        for (name, g) in grads {
            let p = params.get(name);
            ensure!(p.is_some(), Usage, "gradient for unknown parameter {name}");
            ensure!(
                p.unwrap().numel() == g.len(),
                Dimension,
                "gradient for {name} has {} elements, parameter has {}",
                g.len(),
                p.unwrap().numel()
            );
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (name, g) in grads {
            let p = params.get_mut(name).expect("checked above");
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![T::zero(); g.len()]);
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![T::zero(); g.len()]);
            for (((w, &gk), mk), vk) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gk = gk.as_f64();
                let m_new = c.beta1 * mk.as_f64() + (1.0 - c.beta1) * gk;
                let v_new = c.beta2 * vk.as_f64() + (1.0 - c.beta2) * gk * gk;
                *mk = T::of(m_new);
                *vk = T::of(v_new);
                let update = c.learning_rate * (m_new / bc1) / ((v_new / bc2).sqrt() + c.eps);
                *w = T::of(w.as_f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = BTreeMap::from([("w".to_string(), Tensor::new(vec![2], vec![1.0, 1.0]).unwrap())]);
        let grads = BTreeMap::from([("w".to_string(), vec![3.0, -0.5])]);
        let mut adam = AdamState::<f64>::new(AdamConfig::default());
        adam.step(&mut params, &grads).unwrap();
        let w = params["w"].data();
        assert!((w[0] - (1.0 - 1e-4)).abs() < 1e-10);
        assert!((w[1] - (1.0 + 1e-4)).abs() < 1e-10);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut params = BTreeMap::from([("w".to_string(), Tensor::new(vec![1], vec![5.0]).unwrap())]);
        let mut adam = AdamState::<f64>::new(cfg);
        for _ in 0..2000 {
            let g = 2.0 * (params["w"].data()[0] - 2.0);
            adam.step(&mut params, &BTreeMap::from([("w".to_string(), vec![g])])).unwrap();
        }
        assert!((params["w"].data()[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_unknown_and_mismatched() {
        let mut params = BTreeMap::from([("w".to_string(), Tensor::<f64>::zeros(vec![2]))]);
        let mut adam = AdamState::new(AdamConfig::default());
        assert!(adam
            .step(&mut params, &BTreeMap::from([("x".to_string(), vec![0.0])]))
            .is_err());
        assert!(adam
            .step(&mut params, &BTreeMap::from([("w".to_string(), vec![0.0])]))
            .is_err());
        assert_eq!(adam.step, 0);
    }
}
