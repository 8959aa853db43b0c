//! Regression targets and their exact minimizers.
//!
//! The perturbation objective regresses `(x - y) sqrt(D) / r` for pairs
//! `y ~ data`, `x ~ p_r(. | y)`. Its minimizer at `(x, r)` is the posterior
//! average of that target, which points along the electric field.

use ndarray::{Array2, ArrayView2};

use crate::cloud::DataCloud;
use crate::error::{ensure_dim, ensure_positive_anchor, Error, Result};
use crate::field::posterior_weights;
use crate::kernel::{log_weight_rel, sq_dist};
use crate::nn::{Mlp, Preconditioner};
use crate::space::{AugmentedPoint, SpaceConfig};

/// Clean point, its perturbation and the normalized regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub clean: Vec<f64>,
    pub perturbed: AugmentedPoint,
    pub target: Vec<f64>,
}

impl TrainingPair {
    pub fn new(clean: Vec<f64>, perturbed: AugmentedPoint, space: &SpaceConfig) -> Result<Self> {
        let target = pfgmpp_target(&perturbed.x, &clean, perturbed.r, space)?;
        Ok(Self {
            clean,
            perturbed,
            target,
        })
    }
}

/// `(x - y) sqrt(D) / r`. The augmented component of the same target is the
/// constant `sqrt(D)` and is not returned.
pub fn pfgmpp_target(x: &[f64], y: &[f64], r: f64, space: &SpaceConfig) -> Result<Vec<f64>> {
    ensure_positive_anchor(r)?;
    ensure_dim(space.n_data, x.len())?;
    ensure_dim(space.n_data, y.len())?;
    let scale = space.sqrt_d() / r;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * scale).collect())
}

/// Denoising score-matching target `(x - y) / sigma`.
pub fn dsm_target(x: &[f64], y: &[f64], sigma: f64) -> Result<Vec<f64>> {
    ensure_positive_anchor(sigma)?;
    ensure_dim(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) / sigma).collect())
}

/// `Σ_i p(y_i | x) (x - y_i) sqrt(D) / r`, the exact minimizer of the
/// perturbation objective over the cloud.
pub fn minimizer_oracle(p: &AugmentedPoint, cloud: &DataCloud, space: &SpaceConfig) -> Result<Vec<f64>> {
    ensure_positive_anchor(p.r)?;
    let w = posterior_weights(p, cloud, space)?;
    let scale = space.sqrt_d() / p.r;
    let mut out = vec![0.0; space.n_data];
    for (wi, y) in w.iter().zip(cloud.points().rows()) {
        for ((o, xk), yk) in out.iter_mut().zip(&p.x).zip(y) {
            *o += wi * (xk - yk) * scale;
        }
    }
    Ok(out)
}

/// Large-batch target `(sqrt(D) / r) (x - Σ_k ŵ_k y_k)` where `ŵ` is the
/// kernel posterior restricted to the batch `{y1} ∪ aux`.
pub fn stf_target(p: &AugmentedPoint, y1: &[f64], aux: &[Vec<f64>], space: &SpaceConfig) -> Result<Vec<f64>> {
    ensure_positive_anchor(p.r)?;
    ensure_dim(space.n_data, p.x.len())?;
    ensure_dim(space.n_data, y1.len())?;
    for a in aux {
        ensure_dim(space.n_data, a.len())?;
    }
    let batch: Vec<&[f64]> = std::iter::once(y1).chain(aux.iter().map(Vec::as_slice)).collect();
    let lw: Vec<f64> = batch.iter().map(|y| log_weight_rel(sq_dist(&p.x, y), p.r, space)).collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut mean = vec![0.0; space.n_data];
    for (wi, y) in w.iter().zip(&batch) {
        for (m, yk) in mean.iter_mut().zip(y.iter()) {
            *m += wi / total * yk;
        }
    }
    let scale = space.sqrt_d() / p.r;
    Ok(p.x.iter().zip(mean).map(|(a, m)| (a - m) * scale).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    /// Sum over the batch.
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Raw-network targets `(y - c_skip x) / c_out` for every pair.
pub fn raw_targets(precond: &Preconditioner, batch: &[TrainingPair], space: &SpaceConfig) -> Array2<f64> {
    let n = space.n_data;
    let mut t = Array2::zeros((batch.len(), n));
    for (mut row, pair) in t.rows_mut().into_iter().zip(batch) {
        let sigma = space.sigma_of_r(pair.perturbed.r);
        let (c_skip, c_out) = (precond.c_skip(sigma), precond.c_out(sigma));
        for k in 0..n {
            row[k] = (pair.clean[k] - c_skip * pair.perturbed.x[k]) / c_out;
        }
    }
    t
}

/// `Σ_b λ(σ_b) c_out(σ_b)^2 || F_θ(c_in x_b, c_noise) - (y_b - c_skip x_b) / c_out ||^2`
/// with `λ = 1 / c_out^2` folded in analytically, and its gradient with
/// respect to every network parameter.
pub fn preconditioned_loss(
    net: &Mlp,
    precond: &Preconditioner,
    batch: &[TrainingPair],
    space: &SpaceConfig,
) -> Result<LossAndGrad> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let n = space.n_data;
    let mut xs = Array2::zeros((batch.len(), n));
    let mut sigmas = Vec::with_capacity(batch.len());
    for (mut row, pair) in xs.rows_mut().into_iter().zip(batch) {
        ensure_positive_anchor(pair.perturbed.r)?;
        ensure_dim(n, pair.perturbed.x.len())?;
        ensure_dim(n, pair.clean.len())?;
        row.iter_mut().zip(&pair.perturbed.x).for_each(|(a, b)| *a = *b);
        sigmas.push(space.sigma_of_r(pair.perturbed.r));
    }
    let input = preconditioned_input(precond, xs.view(), &sigmas);
    let targets = raw_targets(precond, batch, space);
    square_loss(net, input.view(), targets.view())
}

pub(crate) fn preconditioned_input(precond: &Preconditioner, xs: ArrayView2<'_, f64>, sigmas: &[f64]) -> Array2<f64> {
    let n = xs.ncols();
    let mut input = Array2::zeros((xs.nrows(), n + 1));
    for (b, (mut row, x)) in input.rows_mut().into_iter().zip(xs.rows()).enumerate() {
        let c_in = precond.c_in(sigmas[b]);
        for k in 0..n {
            row[k] = c_in * x[k];
        }
        row[n] = precond.c_noise(sigmas[b]);
    }
    input
}

/// `Σ ||net(input) - targets||^2` and its reverse-mode gradient.
pub fn square_loss(net: &Mlp, input: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<LossAndGrad> {
    let cache = net.forward_cached(input)?;
    let out = cache.output();
    ensure_dim(out.ncols(), targets.ncols())?;
    let resid = &out - &targets;
    let loss = resid.iter().map(|v| v * v).sum::<f64>();
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let grad = net.backward(&cache, (resid * 2.0).view())?;
    Ok(LossAndGrad { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn target_examples() {
        let s = SpaceConfig::finite(2, 4.0).unwrap();
        assert_eq!(pfgmpp_target(&[2.0, 0.0], &[0.0, 0.0], 1.0, &s).unwrap(), vec![4.0, 0.0]);
        assert_eq!(pfgmpp_target(&[1.5, 2.0], &[1.5, 2.0], 1.0, &s).unwrap(), vec![0.0, 0.0]);
        assert!(pfgmpp_target(&[1.0, 0.0], &[0.0, 0.0], 0.0, &s).is_err());
        assert_eq!(dsm_target(&[1.0, 1.0], &[0.0, 0.0], 0.5).unwrap(), vec![2.0, 2.0]);
        assert!(dsm_target(&[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn dsm_and_pfgmpp_coincide_under_alignment() {
        for d in [1.0, 3.0, 64.0, 1e6] {
            let s = SpaceConfig::finite(2, d).unwrap();
            let sigma = 0.37;
            let x = [0.9, -1.3];
            let y = [0.1, 0.2];
            let a = pfgmpp_target(&x, &y, s.r_of_sigma(sigma), &s).unwrap();
            let b = dsm_target(&x, &y, sigma).unwrap();
            for k in 0..2 {
                assert_abs_diff_eq!(a[k], b[k], epsilon = 4.0 * f64::EPSILON * b[k].abs());
            }
        }
    }

    #[test]
    fn single_point_minimizer_is_plain_target() {
        let s = SpaceConfig::finite(2, 7.0).unwrap();
        let c = DataCloud::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let p = AugmentedPoint { x: vec![0.3, -0.4], r: 1.7 };
        assert_eq!(
            minimizer_oracle(&p, &c, &s).unwrap(),
            pfgmpp_target(&p.x, &[1.0, 2.0], p.r, &s).unwrap()
        );
    }

    #[test]
    fn stf_reduces_to_plain_target_without_aux() {
        let s = SpaceConfig::finite(2, 5.0).unwrap();
        let p = AugmentedPoint { x: vec![0.3, -0.4], r: 1.7 };
        let y = [1.0, 2.0];
        let a = stf_target(&p, &y, &[], &s).unwrap();
        let b = pfgmpp_target(&p.x, &y, p.r, &s).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn stf_symmetric_pair_targets_midpoint() {
        let s = SpaceConfig::finite(2, 5.0).unwrap();
        let p = AugmentedPoint { x: vec![0.0, 3.0], r: 2.0 };
        let t = stf_target(&p, &[-1.0, 0.0], &[vec![1.0, 0.0]], &s).unwrap();
        let scale = 5f64.sqrt() / 2.0;
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t[1], 3.0 * scale, epsilon = 1e-14);
    }

    #[test]
    fn stf_full_batch_is_minimizer() {
        let s = SpaceConfig::finite(2, 6.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let c = DataCloud::from_rows(&rows).unwrap();
        let p = AugmentedPoint { x: vec![0.2, 0.1], r: 0.9 };
        let t = stf_target(&p, &rows[3], &rows.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, r)| r.clone()).collect::<Vec<_>>(), &s).unwrap();
        let m = minimizer_oracle(&p, &c, &s).unwrap();
        for k in 0..2 {
            assert!((t[k] - m[k]).abs() < 1e-3);
        }
        assert!(stf_target(&p, &[0.0], &[], &s).is_err());
    }

    #[test]
    fn exact_raw_output_gives_zero_loss() {
        // single linear layer whose bias reproduces the raw target for one pair
        let s = SpaceConfig::finite(1, 4.0).unwrap();
        let pc = Preconditioner::default();
        let pair = TrainingPair::new(vec![0.7], AugmentedPoint { x: vec![1.1], r: 2.0 }, &s).unwrap();
        let t = raw_targets(&pc, std::slice::from_ref(&pair), &s)[[0, 0]];
        let net = Mlp::from_params(&[2, 1], vec![0.0, 0.0, t]).unwrap();
        let lg = preconditioned_loss(&net, &pc, &[pair], &s).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn duplicated_batch_doubles_loss() {
        let s = SpaceConfig::finite(2, 4.0).unwrap();
        let pc = Preconditioner::default();
        let net = Mlp::init(&[3, 4, 2], &mut crate::rng::seeded(7)).unwrap();
        let batch = vec![
            TrainingPair::new(vec![0.1, 0.2], AugmentedPoint { x: vec![0.5, -0.3], r: 1.0 }, &s).unwrap(),
            TrainingPair::new(vec![-1.0, 0.4], AugmentedPoint { x: vec![-0.8, 0.9], r: 0.2 }, &s).unwrap(),
        ];
        let doubled: Vec<_> = batch.iter().chain(batch.iter()).cloned().collect();
        let a = preconditioned_loss(&net, &pc, &batch, &s).unwrap();
        let b = preconditioned_loss(&net, &pc, &doubled, &s).unwrap();
        assert_abs_diff_eq!(b.loss, 2.0 * a.loss, epsilon = 4.0 * f64::EPSILON * a.loss);
        assert!(preconditioned_loss(&net, &pc, &[], &s).is_err());
    }
}
