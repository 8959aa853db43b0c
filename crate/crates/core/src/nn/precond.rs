use serde::{Deserialize, Serialize};

pub const DEFAULT_SIGMA_DATA: f64 = 0.5;

/// Input/output scalings that keep the raw network's inputs and targets at
/// unit variance across noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preconditioner {
    pub sigma_data: f64,
}

impl Default for Preconditioner {
    fn default() -> Self {
        Self {
            sigma_data: DEFAULT_SIGMA_DATA,
        }
    }
}

impl Preconditioner {
    pub fn c_in(&self, sigma: f64) -> f64 {
        1.0 / (sigma * sigma + self.sigma_data * self.sigma_data).sqrt()
    }

    pub fn c_out(&self, sigma: f64) -> f64 {
        sigma * self.sigma_data / (sigma * sigma + self.sigma_data * self.sigma_data).sqrt()
    }

    pub fn c_skip(&self, sigma: f64) -> f64 {
        let sd2 = self.sigma_data * self.sigma_data;
        sd2 / (sigma * sigma + sd2)
    }

    pub fn c_noise(&self, sigma: f64) -> f64 {
        0.25 * sigma.ln()
    }

    /// Loss weight `1 / c_out^2`.
    pub fn lambda(&self, sigma: f64) -> f64 {
        1.0 / (self.c_out(sigma) * self.c_out(sigma))
    }
}
