use serde::{Deserialize, Serialize};

use super::model::{Gradients, RegressorModel};
use crate::error::{GraspError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate at each decay boundary.
    pub decay: f64,
    /// Epochs between decay boundaries.
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 0.6,
            decay_every: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    learning_rate: f64,
    step: u64,
    epoch: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            learning_rate: config.learning_rate,
            config,
            step: 0,
            epoch: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &RegressorModel, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &Gradients) -> Result<()> {
        if params.len() != grads.0.len() || params.len() != self.first.len() {
            return Err(GraspError::ShapeMismatch(format!(
                "{} parameter tensors, {} gradients, {} moment slots",
                params.len(),
                grads.0.len(),
                self.first.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(&grads.0).enumerate() {
            if p.len() != g.len() || p.len() != self.first[i].len() {
                return Err(GraspError::ShapeMismatch(format!(
                    "tensor {i}: {} parameters vs {} gradients",
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let lr = self.learning_rate;
        for (((p, g), m), v) in params
            .into_iter()
            .zip(&grads.0)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Marks an epoch boundary, decaying the learning rate when due.
    pub fn end_epoch(&mut self) {
        self.epoch += 1;
        if self.config.decay_every > 0 && self.epoch % self.config.decay_every as u64 == 0 {
            self.learning_rate *= self.config.decay;
        }
    }
}

pub fn adam_step(model: &mut RegressorModel, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    state.step(model.parameters_mut(), grads)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn first_step_by_hand() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(cfg, &[1]);
        let mut w = [0.0];
        state
            .step(vec![&mut w[..]], &Gradients(vec![vec![1.0]]))
            .unwrap();
        // m_hat = 1, v_hat = 1 after bias correction.
        assert_abs_diff_eq!(w[0], -0.1 / (1.0 + 1e-8), epsilon = 1e-17);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut state = AdamState::new(AdamConfig::default(), &[3]);
        let mut w = [0.5, -1.0, 2.0];
        for _ in 0..5 {
            state
                .step(vec![&mut w[..]], &Gradients(vec![vec![0.0; 3]]))
                .unwrap();
        }
        assert_eq!(w, [0.5, -1.0, 2.0]);
    }

    #[test]
    fn learning_rate_decays_per_epoch() {
        let mut state = AdamState::new(AdamConfig::default(), &[1]);
        assert_eq!(state.learning_rate(), 1e-4);
        state.end_epoch();
        assert_abs_diff_eq!(state.learning_rate(), 1e-4 * 0.6, epsilon = 1e-20);
        let mut every3 = AdamState::new(
            AdamConfig {
                decay_every: 3,
                ..AdamConfig::default()
            },
            &[1],
        );
        every3.end_epoch();
        every3.end_epoch();
        assert_eq!(every3.learning_rate(), 1e-4);
        every3.end_epoch();
        assert_abs_diff_eq!(every3.learning_rate(), 6e-5, epsilon = 1e-20);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        let mut w = [0.0; 3];
        assert!(state
            .step(vec![&mut w[..]], &Gradients(vec![vec![0.0; 3]]))
            .is_err());
    }
}
