//! Diagnostics: phase indicator, radius spread, field/score convergence,
//! posterior ratios, sample distances and sampler sweeps.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::DataCloud;
use crate::error::{ensure_dim, ensure_positive_anchor, Error, Result};
use crate::field::{field_score_divergence, gaussian_probes, posterior_weights, DriftBackend};
use crate::kernel::{perturb, sample_radius_split, sample_unit_direction, RadiusLaw};
use crate::rng::substream;
use crate::sampler::{prior_batch, heun_solve, Injection, NoiseScale, SamplerSchedule};
use crate::space::{Augmentation, AugmentedPoint, SpaceConfig};

/// Mean over probes `x ~ p_r` of `½ Σ_i |w_i(x) - 1/n|`, where `w` is the
/// posterior over cloud points.
pub fn tvd_phase<R: Rng + ?Sized>(
    cloud: &DataCloud,
    r: f64,
    n_probes: usize,
    rng: &mut R,
    space: &SpaceConfig,
) -> Result<f64> {
    ensure_positive_anchor(r)?;
    ensure_dim(space.n_data, cloud.dim())?;
    if n_probes == 0 {
        return Err(Error::Empty("probe set"));
    }
    let probes = (0..n_probes)
        .map(|_| {
            let i = rng.random_range(0..cloud.len());
            perturb(rng, &cloud.point(i).to_vec(), r, space)
        })
        .collect::<Result<Vec<AugmentedPoint>>>()?;
    let uniform = 1.0 / cloud.len() as f64;
    let total = probes
        .par_iter()
        .map(|p| -> Result<f64> {
            let w = posterior_weights(p, cloud, space)?;
            Ok(0.5 * w.iter().map(|wi| (wi - uniform).abs()).sum::<f64>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(total / n_probes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusVariance {
    pub d: Augmentation,
    /// `None` when the variance is infinite (`D <= 2`).
    pub variance: Option<f64>,
}

/// Monte Carlo `Var[R]` at `r = σ sqrt(D)` for each `D`, followed by the
/// Gaussian-limit entry. All entries share the same underlying gamma draws.
pub fn radius_variance_curve(n: usize, sigma: f64, d_list: &[f64], samples: usize, seed: u64) -> Result<Vec<RadiusVariance>> {
    ensure_positive_anchor(sigma)?;
    if samples < 2 {
        return Err(Error::InvalidConfig("need at least two samples".into()));
    }
    if d_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("D list must be strictly ascending".into()));
    }
    let mut spaces = d_list
        .iter()
        .map(|&d| SpaceConfig::finite(n, d))
        .collect::<Result<Vec<_>>>()?;
    spaces.push(SpaceConfig::gaussian(n)?);
    spaces
        .par_iter()
        .map(|space| {
            if space.d().is_some_and(|d| d <= 2.0) {
                return Ok(RadiusVariance {
                    d: space.d_aug,
                    variance: None,
                });
            }
            let law = RadiusLaw::new(*space, space.r_of_sigma(sigma))?;
            let mut num = substream(seed, &[0]);
            let mut den = substream(seed, &[1]);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..samples {
                let x = sample_radius_split(&mut num, &mut den, &law);
                let delta = x - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (x - mean);
            }
            Ok(RadiusVariance {
                d: space.d_aug,
                variance: Some(m2 / (samples - 1) as f64),
            })
        })
        .collect()
}

/// `(D, mean || sqrt(D) e_x/e_r + σ ∇log p_σ ||)` over a shared probe set.
pub fn convergence_curve<R: Rng + ?Sized>(
    cloud: &DataCloud,
    sigma: f64,
    d_list: &[f64],
    n_probes: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let probes = gaussian_probes(rng, cloud, sigma, n_probes)?;
    d_list
        .iter()
        .map(|&d| Ok((d, field_score_divergence(sigma, d, cloud, probes.view())?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    /// `exp(mean log(p(x2|y) / p(x1|y)))` over probes `y ~ p_r(. | x1)`.
    pub empirical: f64,
    /// `((r² N/(D-1) + r²) / (l² + r² N/(D-1) + r²))^((N+D)/2)`.
    pub predicted: f64,
}

/// Closed-form posterior ratio for two points a distance `l` apart.
pub fn predicted_ratio(l: f64, r: f64, n: usize, d: f64) -> f64 {
    let spread = r * r * n as f64 / (d - 1.0) + r * r;
    let h = 0.5 * (n as f64 + d);
    (-h * (l * l / spread).ln_1p()).exp()
}

/// Posterior ratio between `x1 = 0` and `x2 = l e_1` at probes drawn from
/// the kernel around `x1`.
///
/// The empirical value is a geometric mean. The per-probe log ratio has an
/// `O(r l / sqrt(D))` zero-mean term whose exponential dominates an
/// arithmetic mean, while the prediction drops that term.
pub fn posterior_ratio_check<R: Rng + ?Sized>(
    l: f64,
    r: f64,
    n: usize,
    d: f64,
    rng: &mut R,
    n_trials: usize,
) -> Result<RatioCheck> {
    ensure_positive_anchor(r)?;
    if !(l >= 0.0 && l.is_finite()) {
        return Err(Error::InvalidConfig(format!("l must be >= 0, got {l}")));
    }
    if d <= 1.0 {
        return Err(Error::InvalidConfig(format!("the prediction needs D > 1, got {d}")));
    }
    if n_trials == 0 {
        return Err(Error::Empty("trial set"));
    }
    let space = SpaceConfig::finite(n, d)?;
    let h = 0.5 * (n as f64 + d);
    let x1 = vec![0.0; n];
    let mut mean_log = 0.0;
    for _ in 0..n_trials {
        let y = perturb(rng, &x1, r, &space)?.x;
        let d1: f64 = y.iter().map(|v| v * v).sum();
        let d2 = d1 - 2.0 * l * y[0] + l * l;
        mean_log += -h * ((d2 + r * r).ln() - (d1 + r * r).ln());
    }
    mean_log /= n_trials as f64;
    Ok(RatioCheck {
        empirical: if l == 0.0 { 1.0 } else { mean_log.exp() },
        predicted: predicted_ratio(l, r, n, d),
    })
}

/// 1-D Wasserstein-1 distance between two sorted empirical samples.
pub fn wasserstein_1d_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / na as f64;
    }
    // integrate |F_a^{-1}(q) - F_b^{-1}(q)| over the merged quantile breaks
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let qa = (i + 1) as f64 / na as f64;
        let qb = (j + 1) as f64 / nb as f64;
        let next = qa.min(qb);
        total += (next - q) * (a[i] - b[j]).abs();
        q = next;
        if qa <= next {
            i += 1;
        }
        if qb <= next {
            j += 1;
        }
    }
    total
}

/// Mean 1-D Wasserstein-1 distance over `n_proj` random unit directions.
pub fn sliced_wasserstein<R: Rng + ?Sized>(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    n_proj: usize,
    rng: &mut R,
) -> Result<f64> {
    ensure_dim(a.ncols(), b.ncols())?;
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Empty("sample set"));
    }
    if n_proj == 0 {
        return Err(Error::InvalidConfig("need at least one projection".into()));
    }
    let dirs: Vec<Vec<f64>> = (0..n_proj).map(|_| sample_unit_direction(rng, a.ncols())).collect();
    let project = |m: ArrayView2<'_, f64>, u: &[f64]| {
        let mut p: Vec<f64> = m
            .axis_iter(Axis(0))
            .map(|row| row.iter().zip(u).map(|(x, v)| x * v).sum())
            .collect();
        p.sort_by(f64::total_cmp);
        p
    };
    let total: f64 = dirs
        .par_iter()
        .map(|u| wasserstein_1d_sorted(&project(a, u), &project(b, u)))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / n_proj as f64)
}

/// A drift backend to sweep, with the space whose anchors it expects.
pub struct SweepModel<'a> {
    pub label: String,
    pub backend: &'a dyn DriftBackend,
    pub space: SpaceConfig,
}

/// Schedule settings in `σ` units, mapped to each model by `r = σ sqrt(D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub rho: f64,
    pub steps: usize,
    pub samples: usize,
    pub projections: usize,
    pub noise_scale: NoiseScale,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            sigma_max: crate::sampler::DEFAULT_SIGMA_MAX,
            sigma_min: crate::sampler::DEFAULT_SIGMA_MIN,
            rho: crate::sampler::DEFAULT_RHO,
            steps: crate::sampler::DEFAULT_STEPS,
            samples: 4096,
            projections: 64,
            noise_scale: NoiseScale::Std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub d: Augmentation,
    pub alpha: f64,
    pub steps: usize,
    pub nfe: usize,
    pub sw: f64,
}

const STREAM_SW: u64 = u64::MAX;

fn run_cell(
    model: &SweepModel<'_>,
    model_index: usize,
    alpha: f64,
    steps: usize,
    settings: &SweepSettings,
    seed: u64,
    reference: ArrayView2<'_, f64>,
) -> Result<SweepRow> {
    let schedule = SamplerSchedule::from_sigmas(settings.sigma_max, settings.sigma_min, settings.rho, steps, &model.space)?;
    // priors and injection noise depend on the model only, so cells that
    // differ in alpha or T share their random draws
    let mut rng = substream(seed, &[model_index as u64]);
    let x0 = prior_batch(&mut rng, settings.samples, schedule.r_max, &model.space)?;
    let injection = Injection {
        alpha,
        scale: settings.noise_scale,
    };
    let traj = heun_solve(model.backend, &schedule, x0.view(), &mut rng, injection, &model.space, false)?;
    let sw = sliced_wasserstein(
        traj.samples().view(),
        reference,
        settings.projections,
        &mut substream(seed, &[STREAM_SW]),
    )?;
    Ok(SweepRow {
        model: model.label.clone(),
        d: model.space.d_aug,
        alpha,
        steps,
        nfe: traj.nfe,
        sw,
    })
}

/// Sample quality against `reference` for every model and injection strength.
pub fn robustness_sweep(
    models: &[SweepModel<'_>],
    alphas: &[f64],
    settings: &SweepSettings,
    seed: u64,
    reference: ArrayView2<'_, f64>,
) -> Result<Vec<SweepRow>> {
    check_models(models)?;
    let mut rows = Vec::with_capacity(models.len() * alphas.len());
    for (m, model) in models.iter().enumerate() {
        for &alpha in alphas {
            rows.push(run_cell(model, m, alpha, settings.steps, settings, seed, reference)?);
        }
    }
    Ok(rows)
}

/// Sample quality against `reference` for every model and step count, `α = 0`.
pub fn nfe_sweep(
    models: &[SweepModel<'_>],
    steps: &[usize],
    settings: &SweepSettings,
    seed: u64,
    reference: ArrayView2<'_, f64>,
) -> Result<Vec<SweepRow>> {
    check_models(models)?;
    let mut rows = Vec::with_capacity(models.len() * steps.len());
    for (m, model) in models.iter().enumerate() {
        for &t in steps {
            rows.push(run_cell(model, m, 0.0, t, settings, seed, reference)?);
        }
    }
    Ok(rows)
}

fn check_models(models: &[SweepModel<'_>]) -> Result<()> {
    let Some(first) = models.first() else {
        return Err(Error::Empty("model list"));
    };
    for m in models {
        ensure_dim(first.space.n_data, m.space.n_data)?;
        ensure_dim(m.space.n_data, m.backend.dim())?;
    }
    Ok(())
}

/// `SW(α) - SW(0)` for each row, using the `α = 0` row of the same model.
pub fn degradation(rows: &[SweepRow]) -> Vec<(String, f64, f64)> {
    rows.iter()
        .filter_map(|row| {
            let base = rows.iter().find(|b| b.model == row.model && b.alpha == 0.0 && b.steps == row.steps)?;
            Some((row.model.clone(), row.alpha, row.sw - base.sw))
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "D", "alpha", "T", "nfe", "sliced_wasserstein"])?;
    for r in rows {
        wtr.write_record([
            r.model.clone(),
            r.d.to_string(),
            r.alpha.to_string(),
            r.steps.to_string(),
            r.nfe.to_string(),
            r.sw.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_radius_csv<W: std::io::Write>(w: W, rows: &[RadiusVariance]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["D", "radius_variance"])?;
    for r in rows {
        let v = r.variance.map_or_else(|| "inf".to_string(), |v| v.to_string());
        wtr.write_record([r.d.to_string(), v])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Two-column `(D, metric)` table.
pub fn write_pairs_csv<W: std::io::Write>(w: W, metric: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["D", metric])?;
    for (d, v) in rows {
        wtr.write_record([d.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Convenience for tests and the CLI: a cloud's points as an owned matrix.
pub fn points_of(cloud: &DataCloud) -> Array2<f64> {
    cloud.points().to_owned()
}
