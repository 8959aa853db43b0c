//! Anchored-ODE samplers.
//!
//! Heun integrates `dx/dr` from `r_max` down to `r = 0` over a `ρ`-spaced
//! schedule; the last step lands on zero with the predictor alone, so a run of
//! `T` steps costs `2T - 1` drift evaluations. The DDIM-style sampler runs the
//! schedule-driven update on a time-conditioned predictor.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::field::DriftBackend;
use crate::kernel::sample_prior;
use crate::nn::NoisePredictor;
use crate::space::SpaceConfig;
use crate::trainer::DdpmSchedule;

pub const DEFAULT_RHO: f64 = 7.0;
pub const DEFAULT_STEPS: usize = 18;
pub const DEFAULT_SIGMA_MAX: f64 = 80.0;
pub const DEFAULT_SIGMA_MIN: f64 = 0.002;

/// Decreasing anchors `r_0 = r_max, ..., r_{T-1} = r_min, r_T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSchedule {
    pub r_max: f64,
    pub r_min: f64,
    pub rho: f64,
    pub steps: usize,
    nodes: Vec<f64>,
}

impl SamplerSchedule {
    /// Nodes `r_0..r_T`, length `T + 1`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Schedule over `σ ∈ [σ_min, σ_max]` mapped through `r = σ sqrt(D)`.
    pub fn from_sigmas(sigma_max: f64, sigma_min: f64, rho: f64, steps: usize, space: &SpaceConfig) -> Result<Self> {
        build_schedule(space.r_of_sigma(sigma_max), space.r_of_sigma(sigma_min), rho, steps)
    }
}

pub fn build_schedule(r_max: f64, r_min: f64, rho: f64, steps: usize) -> Result<SamplerSchedule> {
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "schedule needs r_max > r_min > 0, got r_max = {r_max}, r_min = {r_min}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    if steps < 2 {
        return Err(Error::InvalidConfig(format!("schedule needs at least 2 steps, got {steps}")));
    }
    let (a, b) = (r_max.powf(1.0 / rho), r_min.powf(1.0 / rho));
    let last = (steps - 1) as f64;
    let mut nodes: Vec<f64> = (0..steps)
        .map(|i| (a + i as f64 / last * (b - a)).powf(rho))
        .collect();
    nodes[0] = r_max;
    nodes[steps - 1] = r_min;
    nodes.push(0.0);
    if nodes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig(format!(
            "schedule nodes are not strictly decreasing for r_max = {r_max}, r_min = {r_min}, rho = {rho}, steps = {steps}"
        )));
    }
    Ok(SamplerSchedule {
        r_max,
        r_min,
        rho,
        steps,
        nodes,
    })
}

/// How the injection scale `r / sqrt(D)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScale {
    /// Per-coordinate standard deviation `r / sqrt(D)`.
    #[default]
    Std,
    /// Per-coordinate variance `r / sqrt(D)`.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub alpha: f64,
    pub scale: NoiseScale,
}

impl Injection {
    pub const NONE: Injection = Injection {
        alpha: 0.0,
        scale: NoiseScale::Std,
    };

    pub fn std(alpha: f64) -> Self {
        Self {
            alpha,
            scale: NoiseScale::Std,
        }
    }

    fn std_at(&self, r: f64, space: &SpaceConfig) -> f64 {
        let s = r / space.sqrt_d();
        match self.scale {
            NoiseScale::Std => s,
            NoiseScale::Variance => s.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `states[i]` holds every chain at anchor `nodes[i]`; the last entry is the sample.
    pub states: Vec<Array2<f64>>,
    pub nodes: Vec<f64>,
    pub nfe: usize,
}

impl Trajectory {
    pub fn samples(&self) -> &Array2<f64> {
        self.states.last().expect("at least the initial state")
    }
}

fn drift_at<B: DriftBackend + ?Sized>(backend: &B, x: ArrayView2<'_, f64>, r: f64, step: usize) -> Result<Array2<f64>> {
    backend.drift_batch(x, r).map_err(|e| Error::Drift {
        step,
        source: Box::new(e),
    })
}

/// Heun integration of every row of `x0` along `schedule`.
///
/// With `injection.alpha > 0`, each step first adds `α ε`, `ε ~ N(0, s² I)`,
/// where `s` is derived from `r_i / sqrt(D)`. Noise is drawn row by row from
/// `rng`. When `keep_states` is false only the initial and final states are kept.
pub fn heun_solve<B, R>(
    backend: &B,
    schedule: &SamplerSchedule,
    x0: ArrayView2<'_, f64>,
    rng: &mut R,
    injection: Injection,
    space: &SpaceConfig,
    keep_states: bool,
) -> Result<Trajectory>
where
    B: DriftBackend + ?Sized,
    R: Rng + ?Sized,
{
    ensure_dim(space.n_data, x0.ncols())?;
    ensure_dim(space.n_data, backend.dim())?;
    if !(injection.alpha >= 0.0 && injection.alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {}", injection.alpha)));
    }
    let nodes = schedule.nodes().to_vec();
    let mut x = x0.to_owned();
    let mut states = vec![x.clone()];
    let mut nfe = 0;
    for i in 0..schedule.steps {
        let (r_cur, r_next) = (nodes[i], nodes[i + 1]);
        if injection.alpha > 0.0 {
            let s = injection.alpha * injection.std_at(r_cur, space);
            x.mapv_inplace(|v| v + s * rng.sample::<f64, _>(StandardNormal));
        }
        let d = drift_at(backend, x.view(), r_cur, i)?;
        nfe += 1;
        let dr = r_next - r_cur;
        let mut next = &x + &(&d * dr);
        if r_next > 0.0 {
            let d2 = drift_at(backend, next.view(), r_next, i)?;
            nfe += 1;
            Zip::from(&mut next)
                .and(&x)
                .and(&d)
                .and(&d2)
                .for_each(|n, &xv, &a, &b| *n = xv + dr * 0.5 * (a + b));
        }
        x = next;
        if keep_states {
            states.push(x.clone());
        }
    }
    if !keep_states {
        states.push(x);
    }
    Ok(Trajectory { states, nodes, nfe })
}

/// Rows `(chain, step, r, x0, x1, ...)` for every stored state.
pub fn write_trajectory_csv<W: std::io::Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let n = traj.states[0].ncols();
    let mut header = vec!["chain".to_string(), "step".into(), "r".into()];
    header.extend((0..n).map(|k| format!("x{k}")));
    wtr.write_record(&header)?;
    // with keep_states off only the endpoints are stored
    let steps: Vec<usize> = if traj.states.len() == traj.nodes.len() {
        (0..traj.states.len()).collect()
    } else {
        vec![0, traj.nodes.len() - 1]
    };
    for c in 0..traj.states[0].nrows() {
        for (state, &step) in traj.states.iter().zip(&steps) {
            let mut rec = vec![c.to_string(), step.to_string(), traj.nodes[step].to_string()];
            rec.extend(state.row(c).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `count` prior draws at `r_max`, one row each.
pub fn prior_batch<R: Rng + ?Sized>(rng: &mut R, count: usize, r_max: f64, space: &SpaceConfig) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((count, space.n_data));
    for mut row in out.rows_mut() {
        let p = sample_prior(rng, r_max, space)?;
        row.iter_mut().zip(p.x).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

/// Draw `count` priors from `rng`, then integrate.
pub fn sample_heun<B, R>(
    backend: &B,
    schedule: &SamplerSchedule,
    count: usize,
    rng: &mut R,
    injection: Injection,
    space: &SpaceConfig,
) -> Result<Array2<f64>>
where
    B: DriftBackend + ?Sized,
    R: Rng + ?Sized,
{
    let x0 = prior_batch(rng, count, schedule.r_max, space)?;
    let traj = heun_solve(backend, schedule, x0.view(), rng, injection, space, false)?;
    Ok(traj.states.into_iter().last().expect("final state"))
}

/// Schedule-driven sampler on a predictor `f(x, t)` trained against
/// `(x - y) sqrt(D) / r` with inputs scaled by `sqrt(α_t)`.
///
/// Starts from `sqrt(α_1) R v` with `R ~ p_{r_max}`, `r_max = σ(1) sqrt(D)`,
/// and steps `t_i = i / T` down to zero.
pub fn ddim_transfer_solve<P, R>(
    predictor: &P,
    ddpm: &DdpmSchedule,
    space: &SpaceConfig,
    rng: &mut R,
    steps: usize,
    count: usize,
) -> Result<Array2<f64>>
where
    P: NoisePredictor + ?Sized,
    R: Rng + ?Sized,
{
    ddpm.validate()?;
    ensure_dim(space.n_data, predictor.dim())?;
    if steps == 0 {
        return Err(Error::InvalidConfig("ddim needs at least one step".into()));
    }
    let r_max = space.r_of_sigma(ddpm.sigma(1.0)?);
    let x = prior_batch(rng, count, r_max, space)?;
    ddim_from(predictor, ddpm, x, steps)
}

/// The update loop of [`ddim_transfer_solve`] from unscaled prior rows `x`.
pub fn ddim_from<P>(predictor: &P, ddpm: &DdpmSchedule, prior: Array2<f64>, steps: usize) -> Result<Array2<f64>>
where
    P: NoisePredictor + ?Sized,
{
    let mut x = prior * ddpm.alpha(1.0)?.sqrt();
    for i in (1..=steps).rev() {
        let t = i as f64 / steps as f64;
        let t_prev = (i - 1) as f64 / steps as f64;
        let (a, a_prev) = (ddpm.alpha(t)?, ddpm.alpha(t_prev)?);
        let ratio = (a_prev / a).sqrt();
        let coef = (1.0 - a_prev).sqrt() - ratio * (1.0 - a).sqrt();
        let f = predictor.predict_batch(x.view(), t).map_err(|e| Error::Drift {
            step: steps - i,
            source: Box::new(e),
        })?;
        x = x * ratio + f * coef;
    }
    Ok(x)
}
