use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pfgmpp::analysis::{
    convergence_curve, degradation, nfe_sweep, posterior_ratio_check, radius_variance_curve, robustness_sweep,
    tvd_phase, write_pairs_csv, write_radius_csv, write_sweep_csv, SweepModel,
};
use pfgmpp::datasets::write_points_csv;
use pfgmpp::rng::substream;
use pfgmpp::sampler::{ddim_transfer_solve, prior_batch, write_trajectory_csv};
use pfgmpp::trainer::write_trace_csv;
use pfgmpp::{
    heun_solve, make_dataset, train, Checkpoint, DataCloud, Injection, ModelKind, NetworkDrift, OracleDrift,
    PreconditionedDenoiser, Preconditioner, SamplerSchedule, SpaceConfig,
};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{runtime, CliError};
use crate::verify::run_checks;

const STREAM_SAMPLE: u64 = 1;
const STREAM_TVD: u64 = 2;
const STREAM_CONVERGENCE: u64 = 3;
const STREAM_RATIO: u64 = 4;

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    core_version: &'static str,
    mode: Mode,
    seed: u64,
    config: &'a RunConfig,
    artifacts: &'a [Artifact],
}

/// What a finished run reports on stdout.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: &'static str,
    pub mode: Mode,
    pub out: PathBuf,
    pub artifacts: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<Artifact>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(BufWriter<&mut fs::File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        body(BufWriter::new(&mut file))?;
        file.sync_all().map_err(runtime)?;
        let bytes = fs::metadata(&path).map_err(runtime)?.len();
        self.written.push(Artifact { file: name.to_string(), bytes });
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |mut w| {
            std::io::Write::write_all(&mut w, text.as_bytes()).map_err(runtime)?;
            std::io::Write::flush(&mut w).map_err(runtime)
        })
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let mut out = Outputs::create(&cfg.out)?;
    out.write_text("config.json", &cfg.to_json())?;
    match cfg.mode {
        Mode::Verify => verify(cfg, &mut out)?,
        Mode::Train => run_train(cfg, &mut out)?,
        Mode::Sample => run_sample(cfg, &mut out)?,
        Mode::Analyze => run_analyze(cfg, &mut out)?,
        Mode::Robustness => run_robustness(cfg, &mut out)?,
    }
    let manifest = Manifest {
        tool: "pfgmpp",
        tool_version: env!("CARGO_PKG_VERSION"),
        core_version: pfgmpp::VERSION,
        mode: cfg.mode,
        seed: cfg.seed,
        config: cfg,
        artifacts: &out.written,
    };
    let text = json_line(&manifest);
    out.write_text("manifest.json", &text)?;
    Ok(RunSummary {
        status: "ok",
        mode: cfg.mode,
        out: cfg.out.clone(),
        artifacts: out.written.iter().map(|a| a.file.clone()).collect(),
    })
}

fn verify(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let report = run_checks(cfg.seed)?;
    out.write_text("verify.json", &json_line(&report))?;
    if report.all_pass() {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(runtime(format!("verification failed: {}", failed.join(", "))))
    }
}

fn dataset(cfg: &RunConfig) -> Result<DataCloud, CliError> {
    let cloud = make_dataset(&cfg.dataset)?;
    if cloud.dim() != cfg.space.n_data {
        return Err(CliError::Validation(format!(
            "dataset has dimension {} but space.n_data is {}",
            cloud.dim(),
            cfg.space.n_data
        )));
    }
    Ok(cloud)
}

fn run_train(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let cloud = dataset(cfg)?;
    let outcome = train(&cloud, &cfg.train_config()).map_err(runtime)?;
    out.write_text("checkpoint.json", &outcome.checkpoint().to_json().map_err(runtime)?)?;
    out.write("trace.csv", |w| write_trace_csv(w, &outcome.trace).map_err(runtime))
}

fn load_checkpoint(path: &Path, space: &SpaceConfig) -> Result<Checkpoint, CliError> {
    let ckpt = Checkpoint::load(path).map_err(|e| match e {
        pfgmpp::Error::Checkpoint(msg) => CliError::Runtime(msg),
        other => runtime(other),
    })?;
    if ckpt.space != *space {
        return Err(CliError::Validation(format!(
            "checkpoint space (N = {}, D = {}) differs from config space (N = {}, D = {})",
            ckpt.space.n_data, ckpt.space.d_aug, space.n_data, space.d_aug
        )));
    }
    Ok(ckpt)
}

fn run_sample(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let s = &cfg.sample;
    let space = cfg.space;
    let mut rng = substream(cfg.seed, &[STREAM_SAMPLE]);
    let ckpt = s.checkpoint.as_deref().map(|p| load_checkpoint(p, &space)).transpose()?;

    if let Some(ckpt) = &ckpt {
        if ckpt.kind == ModelKind::Ddpm {
            let ddpm = ckpt.ddpm.ok_or_else(|| runtime("ddpm checkpoint has no schedule"))?;
            let net = pick(ckpt, s.use_ema);
            let predictor = pfgmpp::nn::TimeConditionedNet::new(net, space.n_data)?;
            let samples =
                ddim_transfer_solve(&predictor, &ddpm, &space, &mut rng, s.steps, s.count).map_err(runtime)?;
            return out.write("samples.csv", |w| write_points_csv(w, samples.view()).map_err(runtime));
        }
    }

    let schedule = SamplerSchedule::from_sigmas(s.sigma_max, s.sigma_min, s.rho, s.steps, &space)?;
    let injection = Injection { alpha: s.alpha, scale: s.noise_scale };
    let x0 = prior_batch(&mut rng, s.count, schedule.r_max, &space).map_err(runtime)?;
    let traj = match &ckpt {
        Some(ckpt) => {
            let precond = Preconditioner { sigma_data: ckpt.sigma_data };
            let denoiser = PreconditionedDenoiser::new(pick(ckpt, s.use_ema), precond, space)?;
            let backend = NetworkDrift::new(denoiser);
            heun_solve(&backend, &schedule, x0.view(), &mut rng, injection, &space, s.trajectory)
        }
        None => {
            let backend = OracleDrift::new(dataset(cfg)?, space)?;
            heun_solve(&backend, &schedule, x0.view(), &mut rng, injection, &space, s.trajectory)
        }
    }
    .map_err(runtime)?;
    out.write("samples.csv", |w| write_points_csv(w, traj.samples().view()).map_err(runtime))?;
    if s.trajectory {
        out.write("trajectory.csv", |w| write_trajectory_csv(w, &traj).map_err(runtime))?;
    }
    Ok(())
}

fn pick(ckpt: &Checkpoint, use_ema: bool) -> pfgmpp::Mlp {
    match (&ckpt.ema, use_ema) {
        (Some(ema), true) => ema.clone(),
        _ => ckpt.net.clone(),
    }
}

#[derive(Serialize)]
struct TvdRow {
    sigma: f64,
    #[serde(rename = "D")]
    d: String,
    tvd: f64,
}

#[derive(Serialize)]
struct RatioRow {
    #[serde(rename = "D")]
    d: String,
    empirical: f64,
    predicted: f64,
}

fn csv_rows<W: std::io::Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row).map_err(runtime)?;
    }
    wr.flush().map_err(runtime)
}

fn run_analyze(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let a = &cfg.analysis;
    let n = cfg.space.n_data;
    let cloud = dataset(cfg)?;

    let mut tvd = Vec::new();
    for (di, &d_aug) in a.dims.iter().enumerate() {
        let space = SpaceConfig { n_data: n, d_aug };
        space.validate()?;
        for (si, &sigma) in a.sigmas.iter().enumerate() {
            let mut rng = substream(cfg.seed, &[STREAM_TVD, di as u64, si as u64]);
            let value = tvd_phase(&cloud, space.r_of_sigma(sigma), a.tvd_probes, &mut rng, &space).map_err(runtime)?;
            tvd.push(TvdRow { sigma, d: d_aug.to_string(), tvd: value });
        }
    }
    out.write("tvd.csv", |w| csv_rows(w, &tvd))?;

    let radius = radius_variance_curve(n, a.radius_sigma, &a.radius_dims, a.radius_samples, cfg.seed).map_err(runtime)?;
    out.write("radius_variance.csv", |w| write_radius_csv(w, &radius).map_err(runtime))?;

    let mut rng = substream(cfg.seed, &[STREAM_CONVERGENCE]);
    let conv = convergence_curve(&cloud, a.convergence_sigma, &a.convergence_dims, a.convergence_probes, &mut rng)
        .map_err(runtime)?;
    out.write("convergence.csv", |w| write_pairs_csv(w, "divergence", &conv).map_err(runtime))?;

    let mut ratios = Vec::new();
    for (i, &d) in a.ratio_dims.iter().enumerate() {
        let r = a.ratio_sigma * d.sqrt();
        let mut rng = substream(cfg.seed, &[STREAM_RATIO, i as u64]);
        let c = posterior_ratio_check(a.ratio_l, r, a.ratio_n, d, &mut rng, a.ratio_trials).map_err(runtime)?;
        ratios.push(RatioRow { d: d.to_string(), empirical: c.empirical, predicted: c.predicted });
    }
    out.write("posterior_ratio.csv", |w| csv_rows(w, &ratios))
}

#[derive(Serialize)]
struct DegradationRow {
    model: String,
    alpha: String,
    degradation: f64,
}

fn run_robustness(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let r = &cfg.robustness;
    let n = cfg.space.n_data;
    let cloud = dataset(cfg)?;
    let reference = match cfg.dataset.resampled(r.reference_count, r.reference_seed) {
        Ok(spec) => make_dataset(&spec)?,
        Err(_) => cloud.clone(),
    };

    let spaces = r
        .dims
        .iter()
        .map(|&d_aug| {
            let space = SpaceConfig { n_data: n, d_aug };
            space.validate().map(|_| space)
        })
        .collect::<pfgmpp::Result<Vec<_>>>()?;
    let backends = spaces
        .iter()
        .map(|&space| OracleDrift::new(cloud.clone(), space))
        .collect::<pfgmpp::Result<Vec<_>>>()?;
    let models: Vec<SweepModel<'_>> = spaces
        .iter()
        .zip(&backends)
        .map(|(&space, backend)| SweepModel {
            label: model_label(&space),
            backend,
            space,
        })
        .collect();

    let rows = robustness_sweep(&models, &r.alphas, &r.sweep, cfg.seed, reference.points()).map_err(runtime)?;
    out.write("robustness.csv", |w| write_sweep_csv(w, &rows).map_err(runtime))?;
    let deg: Vec<_> = degradation(&rows)
        .into_iter()
        .map(|(model, alpha, degradation)| DegradationRow { model, alpha: alpha.to_string(), degradation })
        .collect();
    out.write("degradation.csv", |w| csv_rows(w, &deg))?;

    let rows = nfe_sweep(&models, &r.nfe_steps, &r.sweep, cfg.seed, reference.points()).map_err(runtime)?;
    out.write("nfe.csv", |w| write_sweep_csv(w, &rows).map_err(runtime))
}

fn model_label(space: &SpaceConfig) -> String {
    if space.is_gaussian() {
        "gaussian".to_string()
    } else {
        format!("D{}", space.d_aug)
    }
}
