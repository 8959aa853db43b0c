//! Brute-force electric field of a finite charge cloud in the augmented space.
//!
//! The field at `(x, r)` sourced by charges `(y_i, 0)` is
//! `E ∝ Σ_i (x̃ - ỹ_i) / ||x̃ - ỹ_i||^{N+D}`. After the rotational symmetry of
//! the `D` extra coordinates is used, only the data component `e_x` and the
//! scalar radial component `e_r` remain. Both are returned up to one shared
//! positive constant, which is all the anchored ODE `dx/dr = e_x / e_r` needs.
//!
//! Weights are evaluated in log space relative to their maximum; the omitted
//! constants overflow or underflow once `D` reaches a few dozen.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::cloud::DataCloud;
use crate::error::{ensure_dim, ensure_positive_anchor, Error, Result};
use crate::kernel::{log_density_of_sq_dist, log_weight_rel, sq_dist};
use crate::nn::Denoiser;
use crate::space::{AugmentedPoint, SpaceConfig};

/// Field at one augmented point, up to a shared positive normalizer
/// `exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub e_x: Vec<f64>,
    pub e_r: f64,
    pub log_scale: f64,
}

impl FieldValue {
    /// `e_x / e_r`, the slope of the anchored ODE.
    pub fn ratio(&self) -> Vec<f64> {
        self.e_x.iter().map(|v| v / self.e_r).collect()
    }
}

fn check_point(x: &[f64], cloud: &DataCloud, space: &SpaceConfig) -> Result<()> {
    space.validate()?;
    ensure_dim(space.n_data, cloud.dim())?;
    ensure_dim(space.n_data, x.len())
}

/// Normalized posterior over the cloud at `r > 0`, written into `w`.
/// Returns the maximum relative log-weight.
fn posterior_into(x: &[f64], r: f64, cloud: &DataCloud, space: &SpaceConfig, w: &mut [f64]) -> f64 {
    let pts = cloud.points();
    let mut max = f64::NEG_INFINITY;
    for (wi, y) in w.iter_mut().zip(pts.rows()) {
        let y = y.as_slice().expect("standard layout");
        let lw = log_weight_rel(sq_dist(x, y), r, space);
        *wi = lw;
        max = max.max(lw);
    }
    let mut total = 0.0;
    for wi in w.iter_mut() {
        *wi = (*wi - max).exp();
        total += *wi;
    }
    for wi in w.iter_mut() {
        *wi /= total;
    }
    max
}

fn weighted_mean_into(w: &[f64], cloud: &DataCloud, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (wi, y) in w.iter().zip(cloud.points().rows()) {
        for (o, yk) in out.iter_mut().zip(y) {
            *o += wi * yk;
        }
    }
}

/// Posterior `p(y_i | x)` under the kernel at `p.r`.
///
/// At `r = 0` the posterior is a point mass on a coinciding cloud point; it
/// is undefined when several cloud points coincide with `x`.
pub fn posterior_weights(p: &AugmentedPoint, cloud: &DataCloud, space: &SpaceConfig) -> Result<Vec<f64>> {
    check_point(&p.x, cloud, space)?;
    let n = cloud.len();
    if p.r == 0.0 {
        let d2: Vec<f64> = cloud
            .points()
            .rows()
            .into_iter()
            .map(|y| sq_dist(&p.x, y.as_slice().expect("standard layout")))
            .collect();
        let hits: Vec<usize> = (0..n).filter(|&i| d2[i] == 0.0).collect();
        match hits.len() {
            0 => {}
            1 => {
                let mut w = vec![0.0; n];
                w[hits[0]] = 1.0;
                return Ok(w);
            }
            k => return Err(Error::UndefinedPosterior(k)),
        }
        if space.is_gaussian() {
            // the sigma -> 0 limit concentrates on the nearest point
            let best = d2.iter().cloned().fold(f64::INFINITY, f64::min);
            let nearest: Vec<usize> = (0..n).filter(|&i| d2[i] == best).collect();
            if nearest.len() > 1 {
                return Err(Error::UndefinedPosterior(nearest.len()));
            }
            let mut w = vec![0.0; n];
            w[nearest[0]] = 1.0;
            return Ok(w);
        }
        let h = space.half_total().expect("finite D");
        let lw: Vec<f64> = d2.iter().map(|d| -h * d.ln()).collect();
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = e.iter().sum();
        return Ok(e.into_iter().map(|v| v / total).collect());
    }
    ensure_positive_anchor(p.r)?;
    let mut w = vec![0.0; n];
    posterior_into(&p.x, p.r, cloud, space, &mut w);
    Ok(w)
}

/// Posterior mean `Σ_i w_i y_i`.
pub fn posterior_mean(p: &AugmentedPoint, cloud: &DataCloud, space: &SpaceConfig) -> Result<Vec<f64>> {
    let w = posterior_weights(p, cloud, space)?;
    let mut m = vec![0.0; space.n_data];
    weighted_mean_into(&w, cloud, &mut m);
    Ok(m)
}

/// `e_x = Σ w'_i (x - y_i)`, `e_r = Σ w'_i r` with
/// `w'_i = (||x - y_i||^2 + r^2)^{-(N+D)/2}` rescaled by a common factor.
pub fn empirical_field(p: &AugmentedPoint, cloud: &DataCloud, space: &SpaceConfig) -> Result<FieldValue> {
    check_point(&p.x, cloud, space)?;
    ensure_positive_anchor(p.r)?;
    let pts = cloud.points();
    let lw: Vec<f64> = pts
        .rows()
        .into_iter()
        .map(|y| log_weight_rel(sq_dist(&p.x, y.as_slice().expect("standard layout")), p.r, space))
        .collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e_x = vec![0.0; space.n_data];
    let mut e_r = 0.0;
    for (l, y) in lw.iter().zip(pts.rows()) {
        let w = (l - max).exp();
        for ((e, xk), yk) in e_x.iter_mut().zip(&p.x).zip(y) {
            *e += w * (xk - yk);
        }
        e_r += w * p.r;
    }
    // the r-only terms dropped by log_weight_rel, plus the max shift
    let log_scale = max
        + match space.half_total() {
            Some(h) => -h * (p.r * p.r).ln(),
            None => 0.0,
        };
    Ok(FieldValue { e_x, e_r, log_scale })
}

/// Something that yields `dx/dr` for a batch of states at a common anchor.
pub trait DriftBackend: Sync {
    fn dim(&self) -> usize;

    /// Rows of `xs` are states; the result has the same shape.
    fn drift_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>>;

    fn drift(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(self.drift_batch(xs, r)?.row(0).to_vec())
    }
}

/// Exact drift `(x - E[y | x]) / r` of the empirical field.
#[derive(Debug, Clone)]
pub struct OracleDrift {
    cloud: DataCloud,
    space: SpaceConfig,
}

impl OracleDrift {
    pub fn new(cloud: DataCloud, space: SpaceConfig) -> Result<Self> {
        space.validate()?;
        ensure_dim(space.n_data, cloud.dim())?;
        Ok(Self { cloud, space })
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    pub fn cloud(&self) -> &DataCloud {
        &self.cloud
    }
}

impl DriftBackend for OracleDrift {
    fn dim(&self) -> usize {
        self.space.n_data
    }

    fn drift_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>> {
        ensure_positive_anchor(r)?;
        ensure_dim(self.space.n_data, xs.ncols())?;
        let n = self.space.n_data;
        let mut out = Array2::zeros(xs.raw_dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(xs.axis_iter(Axis(0)).into_par_iter())
            .for_each_init(
                || (vec![0.0; self.cloud.len()], vec![0.0; n], vec![0.0; n]),
                |(w, x, m), (mut o, xr)| {
                    x.iter_mut().zip(xr).for_each(|(a, b)| *a = *b);
                    posterior_into(x, r, &self.cloud, &self.space, w);
                    weighted_mean_into(w, &self.cloud, m);
                    for k in 0..n {
                        o[k] = (x[k] - m[k]) / r;
                    }
                },
            );
        Ok(out)
    }
}

/// Drift `(x - denoise(x, r)) / r` from a learned denoiser.
#[derive(Debug, Clone)]
pub struct NetworkDrift<M> {
    pub model: M,
}

impl<M: Denoiser> NetworkDrift<M> {
    pub fn new(model: M) -> Self {
        Self { model }
    }
}

impl<M: Denoiser> DriftBackend for NetworkDrift<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn drift_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> Result<Array2<f64>> {
        ensure_positive_anchor(r)?;
        let den = self.model.denoise_batch(xs, r)?;
        Ok((&xs - &den) / r)
    }
}

/// Score `∇ log p_sigma(x)` of the Gaussian-smoothed empirical distribution.
pub fn gaussian_score(x: &[f64], sigma: f64, cloud: &DataCloud) -> Result<Vec<f64>> {
    ensure_positive_anchor(sigma)?;
    let space = SpaceConfig::gaussian(cloud.dim())?;
    check_point(x, cloud, &space)?;
    let mut w = vec![0.0; cloud.len()];
    posterior_into(x, sigma, cloud, &space, &mut w);
    let mut m = vec![0.0; cloud.dim()];
    weighted_mean_into(&w, cloud, &mut m);
    Ok(m.iter().zip(x).map(|(mk, xk)| (mk - xk) / (sigma * sigma)).collect())
}

/// Probes `x ~ p_sigma`: uniformly chosen cloud points plus `N(0, sigma^2 I)`.
pub fn gaussian_probes<R: Rng + ?Sized>(rng: &mut R, cloud: &DataCloud, sigma: f64, count: usize) -> Result<Array2<f64>> {
    let space = SpaceConfig::gaussian(cloud.dim())?;
    let mut probes = Array2::zeros((count, cloud.dim()));
    for mut row in probes.rows_mut() {
        let i = rng.random_range(0..cloud.len());
        let y = cloud.point(i).to_vec();
        let p = crate::kernel::perturb(rng, &y, sigma, &space)?;
        row.iter_mut().zip(p.x).for_each(|(a, b)| *a = b);
    }
    Ok(probes)
}

/// Mean over probes of `|| sqrt(D) e_x/e_r + sigma ∇log p_sigma ||` at `r = sigma sqrt(D)`.
///
/// The two terms point in opposite directions (the field pushes away from
/// the charges, the score pulls towards them), so the sum vanishes as
/// `D -> inf`.
pub fn field_score_divergence(sigma: f64, d: f64, cloud: &DataCloud, probes: ArrayView2<'_, f64>) -> Result<f64> {
    ensure_positive_anchor(sigma)?;
    let space = SpaceConfig::finite(cloud.dim(), d)?;
    ensure_dim(cloud.dim(), probes.ncols())?;
    if probes.nrows() == 0 {
        return Err(Error::Empty("probe set"));
    }
    let r = space.r_of_sigma(sigma);
    let sqrt_d = space.sqrt_d();
    let total: f64 = probes
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| -> Result<f64> {
            let x = row.to_vec();
            let field = empirical_field(&AugmentedPoint { x: x.clone(), r }, cloud, &space)?;
            let score = gaussian_score(&x, sigma, cloud)?;
            Ok(field
                .e_x
                .iter()
                .zip(&score)
                .map(|(ex, s)| {
                    let v = sqrt_d * ex / field.e_r + sigma * s;
                    v * v
                })
                .sum::<f64>()
                .sqrt())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / probes.nrows() as f64)
}

/// Rectangular lattice of evaluation nodes in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    axes: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidConfig("lattice must be 1-D or 2-D".into()));
        }
        if axes.iter().any(|a| a.is_empty()) {
            return Err(Error::Empty("lattice axis"));
        }
        Ok(Self { axes })
    }

    /// `count` evenly spaced nodes on `[lo, hi]` along each of `dims` axes.
    pub fn uniform(dims: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidConfig("lattice needs count >= 2 and hi > lo".into()));
        }
        let axis: Vec<f64> = (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect();
        Self::new(vec![axis; dims])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [a] => a.iter().map(|&v| vec![v]).collect(),
            [a, b] => a
                .iter()
                .flat_map(|&u| b.iter().map(move |&v| vec![u, v]))
                .collect(),
            _ => unreachable!("validated in new"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub max_abs: f64,
}

/// Marginal density `q_r(x) = (1/n) Σ_i p_r(x | y_i)` with the kernel's exact
/// normalizer, which makes `∫ q_r = 1` for every `r`.
pub fn marginal_density(x: &[f64], r: f64, cloud: &DataCloud, space: &SpaceConfig) -> Result<f64> {
    check_point(x, cloud, space)?;
    ensure_positive_anchor(r)?;
    let logs: Vec<f64> = cloud
        .points()
        .rows()
        .into_iter()
        .map(|y| log_density_of_sq_dist(sq_dist(x, y.as_slice().expect("standard layout")), r, space))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((max + s.ln()).exp() / cloud.len() as f64)
}

/// Pointwise `∂_r q_r + ∇_x · (q_r dx/dr)` by second-order central differences
/// of step `h` in every variable, at each lattice node.
pub fn continuity_residual(
    lattice: &Lattice,
    cloud: &DataCloud,
    space: &SpaceConfig,
    r: f64,
    h: f64,
) -> Result<ResidualField> {
    ensure_positive_anchor(r)?;
    if !(h > 0.0) || h >= r {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must satisfy 0 < h < r (h = {h}, r = {r})"
        )));
    }
    if space.n_data > 2 {
        return Err(Error::InvalidConfig("continuity check supports N <= 2".into()));
    }
    ensure_dim(space.n_data, lattice.dims())?;
    let oracle = OracleDrift::new(cloud.clone(), *space)?;
    let nodes = lattice.nodes();
    let values = nodes
        .par_iter()
        .map(|x| -> Result<f64> {
            let dq_dr = (marginal_density(x, r + h, cloud, space)? - marginal_density(x, r - h, cloud, space)?) / (2.0 * h);
            let mut div = 0.0;
            for k in 0..x.len() {
                let mut flux = [0.0; 2];
                for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
                    let mut xs = x.clone();
                    xs[k] += sign * h;
                    let q = marginal_density(&xs, r, cloud, space)?;
                    flux[slot] = q * oracle.drift(&xs, r)?[k];
                }
                div += (flux[0] - flux[1]) / (2.0 * h);
            }
            Ok(dq_dr + div)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ResidualField { nodes, values, max_abs })
}
