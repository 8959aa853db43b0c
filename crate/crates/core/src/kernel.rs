//! Power-law perturbation kernel `p_r(x | y) ∝ (||x - y||^2 + r^2)^{-(N+D)/2}`.
//!
//! In hyperspherical coordinates the kernel factors into a uniform direction
//! and a radius law `p_r(R) ∝ R^{N-1} / (R^2 + r^2)^{(N+D)/2}`. The radius is
//! drawn exactly through `R = r * sqrt(B / (1 - B))` with `B ~ Beta(N/2, D/2)`;
//! `B / (1 - B)` is evaluated as the ratio of two Gamma draws so that real
//! `D` is supported and large `D` loses no precision.
//!
//! The Gaussian limit swaps in the isotropic normal of scale `sigma = r`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::{beta::ln_beta, gamma::ln_gamma};

use crate::error::{ensure_dim, ensure_positive_anchor, Error, Result};
use crate::space::{AugmentedPoint, SpaceConfig};

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Log kernel weight of a squared distance, dropping every term that only
/// depends on `r`. Shared by all posterior computations so that ratios stay
/// exact for very large `D`.
#[inline]
pub(crate) fn log_weight_rel(d2: f64, r: f64, space: &SpaceConfig) -> f64 {
    match space.half_total() {
        Some(h) => -h * (d2 / (r * r)).ln_1p(),
        None => -0.5 * d2 / (r * r),
    }
}

/// Unnormalized log kernel `-(N+D)/2 * ln(||x-y||^2 + r^2)`, or
/// `-||x-y||^2 / (2 sigma^2)` in the Gaussian limit.
pub fn kernel_log_unnorm(x: &[f64], y: &[f64], r: f64, space: &SpaceConfig) -> Result<f64> {
    ensure_positive_anchor(r)?;
    ensure_dim(space.n_data, x.len())?;
    ensure_dim(space.n_data, y.len())?;
    let d2 = sq_dist(x, y);
    Ok(match space.half_total() {
        Some(h) => -h * ((r * r).ln() + (d2 / (r * r)).ln_1p()),
        None => -0.5 * d2 / (r * r),
    })
}

/// Fully normalized log density of the kernel in `R^N`.
pub fn kernel_log_density(x: &[f64], y: &[f64], r: f64, space: &SpaceConfig) -> Result<f64> {
    ensure_positive_anchor(r)?;
    ensure_dim(space.n_data, x.len())?;
    ensure_dim(space.n_data, y.len())?;
    Ok(log_density_of_sq_dist(sq_dist(x, y), r, space))
}

pub(crate) fn log_density_of_sq_dist(d2: f64, r: f64, space: &SpaceConfig) -> f64 {
    let n = space.n_data as f64;
    let half_log_pi = 0.5 * std::f64::consts::PI.ln();
    match space.d() {
        // r^D Γ((N+D)/2) / (π^{N/2} Γ(D/2)) (d² + r²)^{-(N+D)/2}
        Some(d) => {
            let h = 0.5 * (n + d);
            -n * r.ln() + ln_gamma(h) - ln_gamma(0.5 * d) - n * half_log_pi
                - h * (d2 / (r * r)).ln_1p()
        }
        None => {
            -0.5 * n * (2.0 * std::f64::consts::PI).ln() - n * r.ln() - 0.5 * d2 / (r * r)
        }
    }
}

/// Distribution of `R = ||x - y||` under the kernel at anchor `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusLaw {
    pub space: SpaceConfig,
    pub r: f64,
}

impl RadiusLaw {
    /// `r = 0` is accepted for sampling (a point mass at zero) but has no density.
    pub fn new(space: SpaceConfig, r: f64) -> Result<Self> {
        space.validate()?;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidConfig(format!("radius law needs r >= 0, got {r}")));
        }
        Ok(Self { space, r })
    }

    pub fn log_pdf(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius density needs R > 0, got {radius}"
            )));
        }
        ensure_positive_anchor(self.r)?;
        let n = self.space.n_data as f64;
        let r = self.r;
        let shape = if n == 1.0 { 0.0 } else { (n - 1.0) * radius.ln() };
        Ok(match self.space.d() {
            Some(d) => {
                let h = 0.5 * (n + d);
                std::f64::consts::LN_2 + shape
                    - n * r.ln()
                    - ln_beta(0.5 * n, 0.5 * d)
                    - h * ((radius / r) * (radius / r)).ln_1p()
            }
            // chi distribution with N degrees of freedom, scale sigma = r
            None => {
                std::f64::consts::LN_2 + shape
                    - n * r.ln()
                    - 0.5 * n * std::f64::consts::LN_2
                    - ln_gamma(0.5 * n)
                    - 0.5 * (radius / r) * (radius / r)
            }
        })
    }
}

/// Normalized density `2 R^{N-1} r^D / (B(N/2, D/2) (R^2 + r^2)^{(N+D)/2})`.
pub fn radius_pdf(radius: f64, law: &RadiusLaw) -> Result<f64> {
    law.log_pdf(radius).map(f64::exp)
}

fn standard_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    // shape > 0 is guaranteed by SpaceConfig validation
    Gamma::new(shape, 1.0).expect("positive gamma shape").sample(rng)
}

enum Variate {
    Numerator,
    Denominator,
}

fn radius_from_gammas(law: &RadiusLaw, mut gamma: impl FnMut(Variate, f64) -> f64) -> f64 {
    if law.r == 0.0 {
        return 0.0;
    }
    let half_n = 0.5 * law.space.n_data as f64;
    loop {
        let ga = gamma(Variate::Numerator, half_n);
        let ratio = match law.space.d() {
            Some(d) => {
                let gb = gamma(Variate::Denominator, 0.5 * d);
                // Beta draw of exactly 1 <=> gb == 0
                if gb <= 0.0 {
                    continue;
                }
                ga / gb
            }
            None => 2.0 * ga,
        };
        if ratio.is_finite() {
            return law.r * ratio.sqrt();
        }
    }
}

pub fn sample_radius<R: Rng + ?Sized>(rng: &mut R, law: &RadiusLaw) -> f64 {
    radius_from_gammas(law, |_, shape| standard_gamma(rng, shape))
}

/// Draw from the radius law, taking the `Gamma(N/2)` and `Gamma(D/2)` variates
/// from two separate streams. Used where draws must be matched across
/// configurations (the Gaussian limit only touches `num`).
pub fn sample_radius_split<R1, R2>(num: &mut R1, den: &mut R2, law: &RadiusLaw) -> f64
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    radius_from_gammas(law, |which, shape| match which {
        Variate::Numerator => standard_gamma(num, shape),
        Variate::Denominator => standard_gamma(den, shape),
    })
}

/// Uniform direction on the unit sphere in `R^n`.
pub fn sample_unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    assert!(n >= 1, "direction needs n >= 1");
    loop {
        let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-150 && norm.is_finite() {
            return w.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// `x = y + radius * direction`. Test hook for injecting the radial draw.
pub fn perturb_with(y: &[f64], r: f64, radius: f64, direction: &[f64]) -> Result<AugmentedPoint> {
    ensure_dim(y.len(), direction.len())?;
    let x = y.iter().zip(direction).map(|(a, u)| a + radius * u).collect();
    AugmentedPoint::new(x, r)
}

/// Draw `x ~ p_r(. | y)` and return `(x, r)`.
pub fn perturb<R: Rng + ?Sized>(
    rng: &mut R,
    y: &[f64],
    r: f64,
    space: &SpaceConfig,
) -> Result<AugmentedPoint> {
    space.validate()?;
    ensure_dim(space.n_data, y.len())?;
    if r == 0.0 {
        return AugmentedPoint::new(y.to_vec(), 0.0);
    }
    if space.is_gaussian() {
        let x = y
            .iter()
            .map(|a| a + r * rng.sample::<f64, _>(StandardNormal))
            .collect();
        return AugmentedPoint::new(x, r);
    }
    let law = RadiusLaw::new(*space, r)?;
    let radius = sample_radius(rng, &law);
    let u = sample_unit_direction(rng, space.n_data);
    perturb_with(y, r, radius, &u)
}

/// The prior at `r_max` is the kernel centred at the origin.
pub fn sample_prior<R: Rng + ?Sized>(
    rng: &mut R,
    r_max: f64,
    space: &SpaceConfig,
) -> Result<AugmentedPoint> {
    ensure_positive_anchor(r_max)?;
    perturb(rng, &vec![0.0; space.n_data], r_max, space)
}
