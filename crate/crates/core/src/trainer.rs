//! Training loops: the preconditioned objective with `r = σ sqrt(D)`, and the
//! variant driven by a variance-preserving `α_t` schedule.
//!
//! Pair generation is parallel; every pair draws from its own substream keyed
//! by `(seed, iteration, index)`, so results do not depend on thread count.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::DataCloud;
use crate::error::{Error, Result};
use crate::kernel::{perturb_with, sample_radius_split, sample_unit_direction, RadiusLaw};
use crate::nn::{
    ema_update, network_widths, AdamConfig, AdamState, Checkpoint, Mlp, ModelKind, PreconditionedDenoiser,
    Preconditioner, TimeConditionedNet, DEFAULT_HIDDEN, DEFAULT_SIGMA_DATA,
};
use crate::objective::{preconditioned_loss, square_loss, TrainingPair};
use crate::rng::substream;
use crate::space::SpaceConfig;

pub const DEFAULT_P_MEAN: f64 = -1.2;
pub const DEFAULT_P_STD: f64 = 1.2;

/// Smallest `t` drawn in schedule mode; `t = 0` would give `σ = 0`.
pub const DDPM_T_MIN: f64 = 1e-5;

const STREAM_INIT: u64 = 0;
const STREAM_PAIRS: u64 = 1;

// sub-paths of a pair stream
const PART_INDEX: u64 = 0;
const PART_SIGMA: u64 = 1;
const PART_DIRECTION: u64 = 2;
const PART_NUMERATOR: u64 = 3;
const PART_DENOMINATOR: u64 = 4;

/// `α_t = exp(-½ t² (β̄_max - β̄_min) - t β̄_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpmSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for DdpmSchedule {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 20.0,
        }
    }
}

impl DdpmSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min >= 0.0 && self.beta_max >= self.beta_min && self.beta_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= beta_min <= beta_max, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("t must lie in [0, 1], got {t}")));
        }
        Ok((-0.5 * t * t * (self.beta_max - self.beta_min) - t * self.beta_min).exp())
    }

    /// `σ(t) = sqrt((1 - α_t) / α_t)`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let a = self.alpha(t)?;
        Ok(((1.0 - a) / a).sqrt())
    }
}

pub fn ddpm_alpha(t: f64, cfg: &TrainConfig) -> Result<f64> {
    cfg.ddpm.alpha(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Edm,
    Ddpm,
}

impl From<TrainMode> for ModelKind {
    fn from(m: TrainMode) -> Self {
        match m {
            TrainMode::Edm => ModelKind::Edm,
            TrainMode::Ddpm => ModelKind::Ddpm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub space: SpaceConfig,
    pub mode: TrainMode,
    pub p_mean: f64,
    pub p_std: f64,
    pub batch: usize,
    pub iterations: usize,
    pub seed: u64,
    pub ema_decay: f64,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    pub sigma_data: f64,
    pub ddpm: DdpmSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            space: SpaceConfig {
                n_data: 2,
                d_aug: crate::space::Augmentation::Finite(128.0),
            },
            mode: TrainMode::Edm,
            p_mean: DEFAULT_P_MEAN,
            p_std: DEFAULT_P_STD,
            batch: 256,
            iterations: 20_000,
            seed: 0,
            ema_decay: 0.999,
            adam: AdamConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            sigma_data: DEFAULT_SIGMA_DATA,
            ddpm: DdpmSchedule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.ddpm.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.p_std >= 0.0 && self.p_std.is_finite() && self.p_mean.is_finite()) {
            return bad(format!("p_std must be finite and >= 0, got {}", self.p_std));
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay must lie in [0, 1), got {}", self.ema_decay));
        }
        if !(self.sigma_data > 0.0 && self.sigma_data.is_finite()) {
            return bad(format!("sigma_data must be positive, got {}", self.sigma_data));
        }
        if !(self.adam.lr > 0.0 && (0.0..1.0).contains(&self.adam.beta1) && (0.0..1.0).contains(&self.adam.beta2)) {
            return bad(format!("invalid adam settings {:?}", self.adam));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }

    pub fn precond(&self) -> Preconditioner {
        Preconditioner {
            sigma_data: self.sigma_data,
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        network_widths(self.space.n_data, &self.hidden)
    }
}

/// `exp(Normal(p_mean, p_std²))`.
pub fn sample_sigma<R: Rng + ?Sized>(rng: &mut R, cfg: &TrainConfig) -> f64 {
    if cfg.p_std == 0.0 {
        return cfg.p_mean.exp();
    }
    Normal::new(cfg.p_mean, cfg.p_std).expect("validated p_std").sample(rng).exp()
}

/// Perturb `y` at noise level `sigma`, drawing each ingredient from its own
/// substream under `key`. Finite `D` uses `r = σ sqrt(D)` and the heavy-tailed
/// radius; the Gaussian limit uses `R = σ sqrt(2 Γ(N/2))`, which is the same
/// numerator variate, so runs at very large `D` track the limit draw for draw.
fn perturb_matched(seed: u64, key: &[u64], y: &[f64], sigma: f64, space: &SpaceConfig) -> Result<(Vec<f64>, f64)> {
    let part = |p: u64| {
        let mut path = key.to_vec();
        path.push(p);
        substream(seed, &path)
    };
    let r = space.r_of_sigma(sigma);
    let law = RadiusLaw::new(*space, r)?;
    let radius = sample_radius_split(&mut part(PART_NUMERATOR), &mut part(PART_DENOMINATOR), &law);
    let u = sample_unit_direction(&mut part(PART_DIRECTION), space.n_data);
    let p = perturb_with(y, r, radius, &u)?;
    Ok((p.x, r))
}

/// Training pair drawn from the substreams under `(seed, key)`.
pub fn matched_training_pair(seed: u64, key: &[u64], cloud: &DataCloud, cfg: &TrainConfig) -> Result<TrainingPair> {
    let with = |p: u64| {
        let mut path = key.to_vec();
        path.push(p);
        substream(seed, &path)
    };
    let i = with(PART_INDEX).random_range(0..cloud.len());
    let sigma = sample_sigma(&mut with(PART_SIGMA), cfg);
    let y = cloud.point(i).to_vec();
    let (x, r) = perturb_matched(seed, key, &y, sigma, &cfg.space)?;
    TrainingPair::new(y, crate::space::AugmentedPoint::new(x, r)?, &cfg.space)
}

/// One training pair: uniform clean point, log-normal `σ`, `r = σ sqrt(D)`,
/// `x ~ p_r(. | y)`.
pub fn make_training_pair<R: Rng + ?Sized>(rng: &mut R, cloud: &DataCloud, cfg: &TrainConfig) -> Result<TrainingPair> {
    matched_training_pair(rng.random(), &[], cloud, cfg)
}

/// Input `sqrt(α_t) x`, time `t` and target `(x - y) sqrt(D) / r` for the
/// schedule-driven objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpmPair {
    pub input: Vec<f64>,
    pub t: f64,
    pub target: Vec<f64>,
}

pub fn matched_ddpm_pair(seed: u64, key: &[u64], cloud: &DataCloud, cfg: &TrainConfig) -> Result<DdpmPair> {
    let with = |p: u64| {
        let mut path = key.to_vec();
        path.push(p);
        substream(seed, &path)
    };
    let i = with(PART_INDEX).random_range(0..cloud.len());
    let t = with(PART_SIGMA).random_range(DDPM_T_MIN..=1.0);
    let alpha = cfg.ddpm.alpha(t)?;
    let sigma = ((1.0 - alpha) / alpha).sqrt();
    let y = cloud.point(i).to_vec();
    let (x, r) = perturb_matched(seed, key, &y, sigma, &cfg.space)?;
    let target = crate::objective::pfgmpp_target(&x, &y, r, &cfg.space)?;
    let scale = alpha.sqrt();
    Ok(DdpmPair {
        input: x.iter().map(|v| v * scale).collect(),
        t,
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Batch mean of the per-example loss.
    pub loss: f64,
    pub sigma_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub net: Mlp,
    pub ema: Mlp,
    pub trace: Vec<TraceRow>,
}

impl TrainOutcome {
    fn pick(&self, use_ema: bool) -> Mlp {
        if use_ema {
            self.ema.clone()
        } else {
            self.net.clone()
        }
    }

    pub fn denoiser(&self, use_ema: bool) -> Result<PreconditionedDenoiser> {
        PreconditionedDenoiser::new(self.pick(use_ema), self.config.precond(), self.config.space)
    }

    pub fn noise_predictor(&self, use_ema: bool) -> Result<TimeConditionedNet> {
        TimeConditionedNet::new(self.pick(use_ema), self.config.space.n_data)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let kind = ModelKind::from(self.config.mode);
        Checkpoint {
            kind,
            space: self.config.space,
            sigma_data: self.config.sigma_data,
            ddpm: (kind == ModelKind::Ddpm).then_some(self.config.ddpm),
            net: self.net.clone(),
            ema: Some(self.ema.clone()),
        }
    }
}

/// Initial parameters for `cfg`; `train` starts from exactly these.
pub fn initial_network(cfg: &TrainConfig) -> Result<Mlp> {
    Mlp::init(&cfg.widths(), &mut substream(cfg.seed, &[STREAM_INIT]))
}

fn batch_loss(net: &Mlp, cloud: &DataCloud, cfg: &TrainConfig, iter: usize) -> Result<(f64, Vec<f64>, f64)> {
    let key = |b: usize| [STREAM_PAIRS, iter as u64, b as u64];
    match cfg.mode {
        TrainMode::Edm => {
            let pairs = (0..cfg.batch)
                .into_par_iter()
                .map(|b| matched_training_pair(cfg.seed, &key(b), cloud, cfg))
                .collect::<Result<Vec<_>>>()?;
            let sigma_mean =
                pairs.iter().map(|p| cfg.space.sigma_of_r(p.perturbed.r)).sum::<f64>() / pairs.len() as f64;
            let lg = preconditioned_loss(net, &cfg.precond(), &pairs, &cfg.space)?;
            Ok((lg.loss, lg.grad, sigma_mean))
        }
        TrainMode::Ddpm => {
            let pairs = (0..cfg.batch)
                .into_par_iter()
                .map(|b| matched_ddpm_pair(cfg.seed, &key(b), cloud, cfg))
                .collect::<Result<Vec<_>>>()?;
            let n = cfg.space.n_data;
            let mut xs = ndarray::Array2::zeros((pairs.len(), n));
            let mut targets = ndarray::Array2::zeros((pairs.len(), n));
            let mut ts = Vec::with_capacity(pairs.len());
            let mut sigma_sum = 0.0;
            for (b, p) in pairs.iter().enumerate() {
                for k in 0..n {
                    xs[[b, k]] = p.input[k];
                    targets[[b, k]] = p.target[k];
                }
                ts.push(p.t);
                sigma_sum += cfg.ddpm.sigma(p.t)?;
            }
            let input = TimeConditionedNet::input(xs.view(), &ts);
            let lg = square_loss(net, input.view(), targets.view())?;
            Ok((lg.loss, lg.grad, sigma_sum / pairs.len() as f64))
        }
    }
}

/// Adam on the batch-mean loss with an EMA copy of the parameters.
pub fn train(cloud: &DataCloud, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::Empty("training cloud"));
    }
    crate::error::ensure_dim(cfg.space.n_data, cloud.dim())?;
    let mut net = initial_network(cfg)?;
    let mut ema = net.clone();
    let mut adam = AdamState::new(cfg.adam, net.num_params());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let inv_b = 1.0 / cfg.batch as f64;
    for iter in 0..cfg.iterations {
        let (loss, mut grad, sigma_mean) = batch_loss(&net, cloud, cfg, iter).map_err(|e| match e {
            Error::NonFiniteLoss => Error::Diverged { iteration: iter },
            other => other,
        })?;
        grad.iter_mut().for_each(|g| *g *= inv_b);
        adam.step(net.params_mut(), &grad)?;
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { iteration: iter });
        }
        ema_update(ema.params_mut(), net.params(), cfg.ema_decay)?;
        trace.push(TraceRow {
            iter,
            loss: loss * inv_b,
            sigma_mean,
        });
    }
    Ok(TrainOutcome {
        config: cfg.clone(),
        net,
        ema,
        trace,
    })
}

/// Trailing moving average of the loss column.
pub fn smoothed_loss(trace: &[TraceRow], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for (i, row) in trace.iter().enumerate() {
        acc += row.loss;
        if i >= window {
            acc -= trace[i - window].loss;
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

pub fn write_trace_csv<W: std::io::Write>(w: W, trace: &[TraceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iter", "loss", "sigma_mean"])?;
    for row in trace {
        wtr.write_record([row.iter.to_string(), row.loss.to_string(), row.sigma_mean.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
