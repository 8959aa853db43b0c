use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        ensure_dim(self.m.len(), params.len())?;
        ensure_dim(self.m.len(), grad.len())?;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// `ema <- decay * ema + (1 - decay) * params`.
pub fn ema_update(ema: &mut [f64], params: &[f64], decay: f64) -> Result<()> {
    if !(0.0..1.0).contains(&decay) {
        return Err(Error::InvalidConfig(format!("ema decay must be in [0, 1), got {decay}")));
    }
    ensure_dim(ema.len(), params.len())?;
    for (e, p) in ema.iter_mut().zip(params) {
        *e = decay * *e + (1.0 - decay) * p;
    }
    Ok(())
}
