//! Run configuration: JSON schema, defaults and flag overrides.
//!
//! Resolution order, lowest to highest precedence: built-in defaults, the
//! `--config` file, then `--seed`, `--out` and `--mode` flags. Unknown keys
//! anywhere in the file are rejected.

use std::path::{Path, PathBuf};

use pfgmpp::analysis::SweepSettings;
use pfgmpp::nn::{AdamConfig, DEFAULT_HIDDEN, DEFAULT_SIGMA_DATA};
use pfgmpp::sampler::{DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS};
use pfgmpp::trainer::{DEFAULT_P_MEAN, DEFAULT_P_STD};
use pfgmpp::{Augmentation, DatasetSpec, DdpmSchedule, NoiseScale, SpaceConfig, TrainConfig, TrainMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Verify,
    Train,
    Sample,
    Analyze,
    Robustness,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::Train => "train",
            Mode::Sample => "sample",
            Mode::Analyze => "analyze",
            Mode::Robustness => "robustness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Output directory. Not echoed into artifacts, so reruns into another
    /// directory produce identical files.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub space: SpaceConfig,
    pub dataset: DatasetSpec,
    pub train: TrainSettings,
    pub sample: SampleSettings,
    pub analysis: AnalysisSettings,
    pub robustness: RobustnessSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Verify,
            seed: 0,
            out: PathBuf::from("runs/default"),
            space: SpaceConfig {
                n_data: 2,
                d_aug: Augmentation::Finite(128.0),
            },
            dataset: DatasetSpec::standard_mixture(),
            train: TrainSettings::default(),
            sample: SampleSettings::default(),
            analysis: AnalysisSettings::default(),
            robustness: RobustnessSettings::default(),
        }
    }
}

/// Trainer settings; the space and seed come from the enclosing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub mode: TrainMode,
    pub p_mean: f64,
    pub p_std: f64,
    pub batch: usize,
    pub iterations: usize,
    pub ema_decay: f64,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    pub sigma_data: f64,
    pub ddpm: DdpmSchedule,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            mode: TrainMode::Edm,
            p_mean: DEFAULT_P_MEAN,
            p_std: DEFAULT_P_STD,
            batch: 256,
            iterations: 20_000,
            ema_decay: 0.999,
            adam: AdamConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            sigma_data: DEFAULT_SIGMA_DATA,
            ddpm: DdpmSchedule::default(),
        }
    }
}

impl TrainSettings {
    pub fn to_train_config(&self, space: SpaceConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            space,
            mode: self.mode,
            p_mean: self.p_mean,
            p_std: self.p_std,
            batch: self.batch,
            iterations: self.iterations,
            seed,
            ema_decay: self.ema_decay,
            adam: self.adam,
            hidden: self.hidden.clone(),
            sigma_data: self.sigma_data,
            ddpm: self.ddpm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSettings {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub rho: f64,
    pub steps: usize,
    pub count: usize,
    pub alpha: f64,
    pub noise_scale: NoiseScale,
    /// Trained model to sample from; the exact field of the dataset otherwise.
    pub checkpoint: Option<PathBuf>,
    pub use_ema: bool,
    /// Also write every intermediate state.
    pub trajectory: bool,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            sigma_max: DEFAULT_SIGMA_MAX,
            sigma_min: DEFAULT_SIGMA_MIN,
            rho: DEFAULT_RHO,
            steps: DEFAULT_STEPS,
            count: 4096,
            alpha: 0.0,
            noise_scale: NoiseScale::Std,
            checkpoint: None,
            use_ema: true,
            trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub sigmas: Vec<f64>,
    pub dims: Vec<Augmentation>,
    pub tvd_probes: usize,
    pub radius_sigma: f64,
    pub radius_dims: Vec<f64>,
    pub radius_samples: usize,
    pub convergence_sigma: f64,
    pub convergence_dims: Vec<f64>,
    pub convergence_probes: usize,
    pub ratio_l: f64,
    pub ratio_sigma: f64,
    pub ratio_n: usize,
    pub ratio_dims: Vec<f64>,
    pub ratio_trials: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            sigmas: vec![0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            dims: vec![Augmentation::Finite(64.0), Augmentation::Finite(2048.0), Augmentation::GaussianLimit],
            tvd_probes: 1024,
            radius_sigma: 1.0,
            radius_dims: vec![4.0, 8.0, 64.0, 512.0, 4096.0],
            radius_samples: 100_000,
            convergence_sigma: 0.5,
            convergence_dims: (1..=5).map(|k| 2f64.powi(4 * k)).collect(),
            convergence_probes: 512,
            ratio_l: 1.0,
            ratio_sigma: 0.5,
            ratio_n: 64,
            ratio_dims: vec![64.0, 256.0, 1024.0, 4096.0],
            ratio_trials: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSettings {
    pub dims: Vec<Augmentation>,
    pub alphas: Vec<f64>,
    pub nfe_steps: Vec<usize>,
    pub sweep: SweepSettings,
    pub reference_count: usize,
    pub reference_seed: u64,
}

impl Default for RobustnessSettings {
    fn default() -> Self {
        Self {
            dims: vec![Augmentation::Finite(64.0), Augmentation::GaussianLimit],
            alphas: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            nfe_steps: vec![4, 8, 16, 32],
            sweep: SweepSettings::default(),
            reference_count: 4096,
            reference_seed: 101,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Defaults, then the file at `path` if any, then `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(mode) = overrides.mode {
            cfg.mode = mode;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.to_train_config(self.space, self.seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        self.space.validate()?;
        self.train_config().validate()?;
        let s = &self.sample;
        if !(s.sigma_max > s.sigma_min && s.sigma_min > 0.0 && s.sigma_max.is_finite()) {
            return bad(format!("sample: need sigma_max > sigma_min > 0, got {} and {}", s.sigma_max, s.sigma_min));
        }
        if !(s.rho > 0.0 && s.rho.is_finite()) {
            return bad(format!("sample: rho must be positive, got {}", s.rho));
        }
        if s.steps < 2 {
            return bad(format!("sample: steps must be at least 2, got {}", s.steps));
        }
        if s.count == 0 {
            return bad("sample: count must be at least 1".into());
        }
        if !(s.alpha >= 0.0 && s.alpha.is_finite()) {
            return bad(format!("sample: alpha must be >= 0, got {}", s.alpha));
        }
        let a = &self.analysis;
        if a.sigmas.iter().chain([&a.radius_sigma, &a.convergence_sigma, &a.ratio_sigma]).any(|v| !(*v > 0.0)) {
            return bad("analysis: every sigma must be positive".into());
        }
        for d in &a.dims {
            SpaceConfig { n_data: self.space.n_data, d_aug: *d }.validate()?;
        }
        if a.tvd_probes == 0 || a.radius_samples < 2 || a.convergence_probes == 0 || a.ratio_trials == 0 {
            return bad("analysis: probe and sample counts must be positive".into());
        }
        if a.ratio_dims.iter().any(|d| !(*d > 1.0)) || a.ratio_n == 0 {
            return bad("analysis: ratio_dims must exceed 1 and ratio_n must be positive".into());
        }
        let r = &self.robustness;
        if r.dims.is_empty() {
            return bad("robustness: dims must not be empty".into());
        }
        for d in &r.dims {
            SpaceConfig { n_data: self.space.n_data, d_aug: *d }.validate()?;
        }
        if !r.alphas.contains(&0.0) || r.alphas.iter().any(|a| !(*a >= 0.0)) {
            return bad("robustness: alphas must be >= 0 and include 0".into());
        }
        if r.nfe_steps.iter().any(|&t| t < 2) {
            return bad("robustness: nfe_steps entries must be at least 2".into());
        }
        if r.sweep.samples == 0 || r.sweep.projections == 0 || r.reference_count == 0 {
            return bad("robustness: samples, projections and reference_count must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig { ..RunConfig::default() });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"sedd": 1}"#,
            r#"{"train": {"iters": 5}}"#,
            r#"{"space": {"n_data": 2, "d": 4}}"#,
            r#"{"sample": {"sigma_mx": 80}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(CliError::Validation(_))), "{text}");
        }
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.space.d_aug = Augmentation::GaussianLimit;
        cfg.sample.checkpoint = Some("model.json".into());
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(RunConfig { out: cfg.out.clone(), ..back }, cfg);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 5, "mode": "train", "out": "from-file"}"#).unwrap();
        let file_only = RunConfig::resolve(Some(&path), &Overrides::default()).unwrap();
        assert_eq!((file_only.seed, file_only.mode), (5, Mode::Train));
        assert_eq!(file_only.out, PathBuf::from("from-file"));
        let o = Overrides {
            seed: Some(9),
            out: Some("flag".into()),
            mode: Some(Mode::Sample),
        };
        let both = RunConfig::resolve(Some(&path), &o).unwrap();
        assert_eq!((both.seed, both.mode), (9, Mode::Sample));
        assert_eq!(both.out, PathBuf::from("flag"));
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.sample.sigma_min = 100.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.robustness.alphas = vec![0.1];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.train.batch = 0;
        assert!(matches!(cfg.validate(), Err(CliError::Validation(_))));
    }
}
