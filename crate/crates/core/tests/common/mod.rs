//! Independent reference computations for the integration tests.
//!
//! Nothing here calls into the library's numerics; formulas are rebuilt from
//! standard special functions so a shared bug cannot cancel out.

#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

/// Density of `R` when `R² / r²` is Beta-prime(N/2, D/2).
pub fn beta_prime_radius_log_pdf(radius: f64, n: f64, d: f64, r: f64) -> f64 {
    let (a, b) = (0.5 * n, 0.5 * d);
    let u = (radius / r).powi(2);
    let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    // p_U(u) du with u = R²/r², du/dR = 2R/r²
    (a - 1.0) * u.ln() - (a + b) * u.ln_1p() - ln_b + (2.0 * radius / (r * r)).ln()
}

/// Chi law with `n` degrees of freedom and scale `s`.
pub fn chi_log_pdf(radius: f64, n: f64, s: f64) -> f64 {
    let z = radius / s;
    (1.0 - 0.5 * n) * std::f64::consts::LN_2 - ln_gamma(0.5 * n) + (n - 1.0) * z.ln() - 0.5 * z * z - s.ln()
}

/// `P(R <= radius)` via the regularized incomplete beta function:
/// `R² / (R² + r²) ~ Beta(N/2, D/2)`.
pub fn radius_cdf(radius: f64, n: f64, d: f64, r: f64) -> f64 {
    let u = radius * radius / (radius * radius + r * r);
    beta_reg(0.5 * n, 0.5 * d, u)
}

/// Tanh-sinh quadrature of `f` over `(0, 1)`. The endpoints are never evaluated.
pub fn tanh_sinh_unit(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 256.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    let mut k = -(7.0 / h) as i64;
    while k as f64 * h <= 7.0 {
        let u = k as f64 * h;
        let s = half_pi * u.sinh();
        let c = s.cosh();
        // t = (1 + tanh s) / 2, computed from the nearer endpoint
        let e = (-2.0 * s.abs()).exp();
        let near = e / (1.0 + e);
        let t = if s < 0.0 { near } else { 1.0 - near };
        if near > 0.0 && t > 0.0 && t < 1.0 {
            let w = 0.5 * half_pi * u.cosh() / (c * c);
            let v = f(t);
            if v.is_finite() {
                total += w * v;
            }
        }
        k += 1;
    }
    total * h
}

/// `∫_0^∞ g(R) dR` with `R = s t / (1 - t)`.
pub fn integrate_half_line(s: f64, log_g: impl Fn(f64) -> f64) -> f64 {
    tanh_sinh_unit(|t| {
        let radius = s * t / (1.0 - t);
        if !(radius > 0.0 && radius.is_finite()) {
            return 0.0;
        }
        let log_jac = s.ln() - 2.0 * (1.0 - t).ln();
        (log_g(radius) + log_jac).exp()
    })
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_one_sample(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Kernel posterior over `cloud` at `(x, r)` computed directly from the
/// unnormalized kernel with a log-sum-exp shift.
pub fn naive_posterior(x: &[f64], r: f64, cloud: &[Vec<f64>], n: usize, d: Option<f64>) -> Vec<f64> {
    let logs: Vec<f64> = cloud
        .iter()
        .map(|y| {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            match d {
                Some(d) => -0.5 * (n as f64 + d) * (d2 + r * r).ln(),
                None => -0.5 * d2 / (r * r),
            }
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `log Σ_i N(x; y_i, σ² I)` up to an additive constant.
pub fn gaussian_mixture_log_density(x: &[f64], sigma: f64, cloud: &[Vec<f64>]) -> f64 {
    let logs: Vec<f64> = cloud
        .iter()
        .map(|y| -0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (sigma * sigma))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// `max |a - b| / max(|a|, |b|)`, falling back to the absolute gap when both
/// are below `floor`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale < floor {
                (x - y).abs()
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
