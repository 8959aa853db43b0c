//! Fast self-checks of the numerical core, run by `--mode verify`.

use pfgmpp::analysis::{convergence_curve, tvd_phase};
use pfgmpp::field::{continuity_residual, empirical_field, Lattice};
use pfgmpp::objective::{minimizer_oracle, preconditioned_loss};
use pfgmpp::rng::substream;
use pfgmpp::sampler::{DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS};
use pfgmpp::{
    make_dataset, perturb, sample_heun, sample_radius, AugmentedPoint, DataCloud, DatasetSpec, Injection, Mlp,
    OracleDrift, Preconditioner, RadiusLaw, SamplerSchedule, SpaceConfig, TrainingPair,
};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::error::{runtime, CliError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    /// Human-readable pass condition on `value`.
    pub bound: &'static str,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn check(name: &'static str, value: f64, bound: &'static str, pass: bool) -> Check {
    Check { name, value, bound, pass }
}

type Res<T> = Result<T, CliError>;

fn radius_ks(seed: u64) -> Res<Check> {
    let law = RadiusLaw::new(SpaceConfig::finite(2, 6.0)?, 1.0)?;
    let mut rng = substream(seed, &[1]);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_radius(&mut rng, &law)).collect();
    let v = ks(xs, |x| beta_reg(1.0, 3.0, x * x / (x * x + 1.0)));
    Ok(check("radius_ks", v, "< 0.01", v < 0.01))
}

fn radius_moment(seed: u64) -> Res<Check> {
    let law = RadiusLaw::new(SpaceConfig::finite(2, 8.0)?, 3.0)?;
    let mut rng = substream(seed, &[2]);
    let m = (0..1_000_000).map(|_| sample_radius(&mut rng, &law).powi(2)).sum::<f64>() / 1e6;
    let v = (m / 3.0 - 1.0).abs();
    Ok(check("radius_second_moment_rel_err", v, "< 0.02", v < 0.02))
}

fn gaussian_limit_ks(seed: u64) -> Res<Check> {
    let space = SpaceConfig::finite(2, 1e6)?;
    let mut rng = substream(seed, &[3]);
    let draws = (0..100_000)
        .map(|_| perturb(&mut rng, &[0.0, 0.0], 1e3, &space).map(|p| p.x))
        .collect::<pfgmpp::Result<Vec<_>>>()
        .map_err(runtime)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let v = (0..2)
        .map(|k| ks(draws.iter().map(|x| x[k]).collect(), |x| normal.cdf(x)))
        .fold(0.0, f64::max);
    Ok(check("gaussian_limit_ks", v, "< 0.01", v < 0.01))
}

fn divergence(seed: u64) -> Res<Vec<Check>> {
    let cloud = make_dataset(&DatasetSpec::standard_ten_point())?;
    let ds: Vec<f64> = (1..=5).map(|k| 2f64.powi(4 * k)).collect();
    let curve = convergence_curve(&cloud, 0.5, &ds, 512, &mut substream(seed, &[4])).map_err(runtime)?;
    let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1);
    let last = curve.last().expect("five entries").1;
    Ok(vec![
        check("divergence_decreasing", f64::from(u8::from(decreasing)), "== 1", decreasing),
        check("divergence_at_2^20", last, "< 0.01", last < 1e-2),
    ])
}

fn minimizer(seed: u64) -> Res<Vec<Check>> {
    let cloud = make_dataset(&DatasetSpec::standard_ten_point())?;
    let mut rng = substream(seed, &[5]);
    let space = SpaceConfig::finite(2, 128.0)?;
    let mut worst_cos: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r = 10f64.powf(rng.random_range(-1.0..2.0));
        let p = AugmentedPoint::new(x, r)?;
        let m = minimizer_oracle(&p, &cloud, &space).map_err(runtime)?;
        let f = empirical_field(&p, &cloud, &space).map_err(runtime)?;
        let a = [m[0], m[1], space.sqrt_d()];
        let b = [f.e_x[0], f.e_x[1], f.e_r];
        let dot: f64 = a.iter().zip(&b).map(|(u, v)| u * v).sum();
        let na = a.iter().map(|u| u * u).sum::<f64>().sqrt();
        let nb = b.iter().map(|u| u * u).sum::<f64>().sqrt();
        worst_cos = worst_cos.max((dot / (na * nb) - 1.0).abs());
    }
    let big = SpaceConfig::finite(2, 1e6)?;
    let gauss = SpaceConfig::gaussian(2)?;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sigma = rng.random_range(0.3..2.0);
        let a = minimizer_oracle(&AugmentedPoint::new(x.clone(), big.r_of_sigma(sigma))?, &cloud, &big).map_err(runtime)?;
        let b = minimizer_oracle(&AugmentedPoint::new(x, sigma)?, &cloud, &gauss).map_err(runtime)?;
        worst_gap = a.iter().zip(&b).fold(worst_gap, |w, (u, v)| w.max((u - v).abs()));
    }
    Ok(vec![
        check("minimizer_cosine_err", worst_cos, "< 1e-12", worst_cos < 1e-12),
        check("minimizer_gaussian_gap", worst_gap, "< 1e-3", worst_gap < 1e-3),
    ])
}

fn continuity_ratio(rows: &[Vec<f64>]) -> Res<f64> {
    let cloud = DataCloud::from_rows(rows)?;
    let space = SpaceConfig::finite(1, 3.0)?;
    let lattice = Lattice::uniform(1, -2.5, 2.5, 51)?;
    let coarse = continuity_residual(&lattice, &cloud, &space, 1.0, 0.1).map_err(runtime)?;
    let fine = continuity_residual(&lattice, &cloud, &space, 1.0, 0.05).map_err(runtime)?;
    Ok(coarse.max_abs / fine.max_abs)
}

fn continuity() -> Res<Vec<Check>> {
    let single = continuity_ratio(&[vec![0.0]])?;
    let pair = continuity_ratio(&[vec![-1.0], vec![1.0]])?;
    let ok = |v: f64| (3.0..=5.0).contains(&v);
    Ok(vec![
        check("continuity_ratio_single_point", single, "in [3, 5]", ok(single)),
        check("continuity_ratio_two_points", pair, "in [3, 5]", ok(pair)),
    ])
}

fn single_point_exact(seed: u64) -> Res<Check> {
    let y = [1.0, -1.0];
    let space = SpaceConfig::finite(2, 128.0)?;
    let oracle = OracleDrift::new(DataCloud::from_rows(&[y.to_vec()])?, space)?;
    let mut worst: f64 = 0.0;
    for steps in [2usize, 3, 5, 18, 50] {
        let sched = SamplerSchedule::from_sigmas(DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_RHO, steps, &space)?;
        let out = sample_heun(&oracle, &sched, 64, &mut substream(seed, &[6, steps as u64]), Injection::NONE, &space)
            .map_err(runtime)?;
        for row in out.rows() {
            worst = worst.max((row[0] - y[0]).abs()).max((row[1] - y[1]).abs());
        }
    }
    Ok(check("single_point_max_err", worst, "< 1e-9", worst < 1e-9))
}

fn phase_alignment(seed: u64) -> Res<Check> {
    let cloud = make_dataset(&DatasetSpec::standard_mixture())?;
    let mut vals = Vec::new();
    for space in [SpaceConfig::finite(2, 64.0)?, SpaceConfig::finite(2, 2048.0)?, SpaceConfig::gaussian(2)?] {
        let r = space.r_of_sigma(0.5);
        vals.push(tvd_phase(&cloud, r, 1024, &mut substream(seed, &[7]), &space).map_err(runtime)?);
    }
    let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
    Ok(check("phase_alignment_spread", spread, "< 0.1", spread < 0.1))
}

fn gradient(seed: u64) -> Res<Check> {
    let widths = [3, 8, 8, 2];
    let mut rng = substream(seed, &[8]);
    let net = Mlp::init(&widths, &mut rng)?;
    let space = SpaceConfig::finite(2, 128.0)?;
    let precond = Preconditioner::default();
    let batch = (0..4)
        .map(|_| {
            let y = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let sigma = rng.random_range(-2.0f64..1.0).exp();
            let p = perturb(&mut rng, &y, space.r_of_sigma(sigma), &space)?;
            TrainingPair::new(y, p, &space)
        })
        .collect::<pfgmpp::Result<Vec<_>>>()
        .map_err(runtime)?;
    let loss = |params: &[f64]| -> Res<f64> {
        let n = Mlp::from_params(&widths, params.to_vec())?;
        Ok(preconditioned_loss(&n, &precond, &batch, &space).map_err(runtime)?.loss)
    };
    let grad = preconditioned_loss(&net, &precond, &batch, &space).map_err(runtime)?.grad;
    let h = 1e-5;
    let mut p = net.params().to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let keep = p[i];
        p[i] = keep + h;
        let up = loss(&p)?;
        p[i] = keep - h;
        let down = loss(&p)?;
        p[i] = keep;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs());
        let err = if scale < 1e-6 { (fd - grad[i]).abs() } else { (fd - grad[i]).abs() / scale };
        worst = worst.max(err);
    }
    Ok(check("gradient_rel_err", worst, "< 1e-5", worst < 1e-5))
}

fn schedule() -> Res<Check> {
    let (smax, smin, rho, t) = (DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_RHO, DEFAULT_STEPS);
    let sched = SamplerSchedule::from_sigmas(smax, smin, rho, t, &SpaceConfig::gaussian(2)?)?;
    let worst = (0..t)
        .map(|i| {
            let want = (smax.powf(1.0 / rho) + i as f64 / (t - 1) as f64 * (smin.powf(1.0 / rho) - smax.powf(1.0 / rho)))
                .powf(rho);
            (sched.nodes()[i] / want - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(check("schedule_rel_err", worst, "< 1e-12", worst < 1e-12))
}

pub fn run_checks(seed: u64) -> Result<VerifyReport, CliError> {
    let mut checks = vec![radius_ks(seed)?, radius_moment(seed)?, gaussian_limit_ks(seed)?];
    checks.extend(divergence(seed)?);
    checks.extend(minimizer(seed)?);
    checks.extend(continuity()?);
    checks.push(single_point_exact(seed)?);
    checks.push(phase_alignment(seed)?);
    checks.push(gradient(seed)?);
    checks.push(schedule()?);
    Ok(VerifyReport { seed, checks })
}

