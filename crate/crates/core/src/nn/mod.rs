//! Small denoiser network: MLP, preconditioning, Adam, EMA and checkpoints.

mod adam;
mod checkpoint;
mod mlp;
mod precond;

pub use adam::{ema_update, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, ModelKind};
pub use mlp::{ForwardCache, Mlp};
pub use precond::{Preconditioner, DEFAULT_SIGMA_DATA};

use ndarray::{s, Array2, ArrayView2};

use crate::error::{ensure_dim, ensure_positive_anchor, Error, Result};
use crate::objective::{preconditioned_input, preconditioned_loss, LossAndGrad, TrainingPair};
use crate::space::SpaceConfig;

/// Hidden widths used when none are configured.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 128, 128];

/// Estimate of the clean point behind each noisy state at anchor `r`.
pub trait Denoiser: Sync {
    fn dim(&self) -> usize;

    fn denoise_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>>;

    fn denoise(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(self.denoise_batch(xs, r)?.row(0).to_vec())
    }
}

impl<T: Denoiser + ?Sized> Denoiser for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn denoise_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>> {
        (**self).denoise_batch(xs, r)
    }
}

/// Widths `[N + 1, hidden..., N]` for a network on `N`-dimensional data.
pub fn network_widths(n_data: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(n_data + 1);
    w.extend_from_slice(hidden);
    w.push(n_data);
    w
}

/// `D_θ(x, r) = c_skip(σ) x + c_out(σ) F_θ(c_in(σ) x, c_noise(σ))`, `σ = r / sqrt(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedDenoiser {
    pub net: Mlp,
    pub precond: Preconditioner,
    pub space: SpaceConfig,
}

impl PreconditionedDenoiser {
    pub fn new(net: Mlp, precond: Preconditioner, space: SpaceConfig) -> Result<Self> {
        space.validate()?;
        ensure_dim(space.n_data + 1, net.input_dim())?;
        ensure_dim(space.n_data, net.output_dim())?;
        Ok(Self { net, precond, space })
    }

    /// Network input rows `[c_in(σ_b) x_b, c_noise(σ_b)]`.
    pub fn network_input(&self, xs: ArrayView2<'_, f64>, sigmas: &[f64]) -> Array2<f64> {
        preconditioned_input(&self.precond, xs, sigmas)
    }

    /// Normalized field estimate `(x - D_θ(x, r)) sqrt(D) / r`.
    pub fn field_estimate(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        let d = self.denoise(x, r)?;
        let scale = self.space.sqrt_d() / r;
        Ok(x.iter().zip(d).map(|(a, b)| (a - b) * scale).collect())
    }

    /// Value and gradient of the preconditioned square loss over `batch`.
    pub fn loss_and_grad(&self, batch: &[TrainingPair]) -> Result<LossAndGrad> {
        preconditioned_loss(&self.net, &self.precond, batch, &self.space)
    }
}

impl Denoiser for PreconditionedDenoiser {
    fn dim(&self) -> usize {
        self.space.n_data
    }

    fn denoise_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>> {
        ensure_positive_anchor(r)?;
        ensure_dim(self.space.n_data, xs.ncols())?;
        let sigma = self.space.sigma_of_r(r);
        let input = self.network_input(xs, &vec![sigma; xs.nrows()]);
        let f = self.net.forward(input.view())?;
        Ok(&xs * self.precond.c_skip(sigma) + &f * self.precond.c_out(sigma))
    }
}

/// Time-conditioned predictor `f_θ(x, t)` used by the DDIM-style sampler.
pub trait NoisePredictor: Sync {
    fn dim(&self) -> usize;

    fn predict_batch(&self, xs: ArrayView2<'_, f64>, t: f64) -> Result<Array2<f64>>;
}

/// Unpreconditioned network with input `[x, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeConditionedNet {
    pub net: Mlp,
}

impl TimeConditionedNet {
    pub fn new(net: Mlp, n_data: usize) -> Result<Self> {
        ensure_dim(n_data + 1, net.input_dim())?;
        ensure_dim(n_data, net.output_dim())?;
        Ok(Self { net })
    }

    pub fn input(xs: ArrayView2<'_, f64>, ts: &[f64]) -> Array2<f64> {
        let n = xs.ncols();
        let mut input = Array2::zeros((xs.nrows(), n + 1));
        input.slice_mut(s![.., ..n]).assign(&xs);
        for (b, t) in ts.iter().enumerate() {
            input[[b, n]] = *t;
        }
        input
    }
}

impl NoisePredictor for TimeConditionedNet {
    fn dim(&self) -> usize {
        self.net.output_dim()
    }

    fn predict_batch(&self, xs: ArrayView2<'_, f64>, t: f64) -> Result<Array2<f64>> {
        ensure_dim(self.dim(), xs.ncols())?;
        self.net.forward(Self::input(xs, &vec![t; xs.nrows()]).view())
    }
}
