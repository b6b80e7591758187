use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam optimizer state for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, param_count: usize) -> Adam {
        Adam { config, step: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one bias-corrected Adam update. Non-finite gradients leave the
    /// parameters untouched and return an error.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.flat();
        if g.len() != self.m.len() {
            return Err(Error::Shape(format!("optimizer sized for {} parameters, got {}", self.m.len(), g.len())));
        }
        if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {pos} is {}", g[pos])));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let mut offset = 0;
        for tensor in params.tensors_mut() {
            for p in tensor.iter_mut() {
                let i = offset;
                offset += 1;
                self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = self.m[i] / c1;
                let v_hat = self.v[i] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
