use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pfgmpp::analysis::sliced_wasserstein;
use pfgmpp::objective::{preconditioned_loss, TrainingPair};
use pfgmpp::rng::seeded;
use pfgmpp::{perturb, sample_radius, DriftBackend, Mlp, OracleDrift, Preconditioner, RadiusLaw};
use pfgmpp_bench::{mixture, prior_points, space};

fn kernel(c: &mut Criterion) {
    let sp = space(128.0);
    let law = RadiusLaw::new(sp, 4.0).unwrap();
    let mut rng = seeded(1);
    c.bench_function("sample_radius D=128", |b| b.iter(|| sample_radius(&mut rng, black_box(&law))));
    c.bench_function("perturb D=128", |b| b.iter(|| perturb(&mut rng, black_box(&[0.5, -0.5]), 4.0, &sp).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let sp = space(128.0);
    let drift = OracleDrift::new(mixture(), sp).unwrap();
    let xs = prior_points(256, 4.0, &sp, 2);
    c.bench_function("oracle drift 256 x 1024 points", |b| b.iter(|| drift.drift_batch(black_box(xs.view()), 4.0).unwrap()));
}

fn network(c: &mut Criterion) {
    let sp = space(128.0);
    let mut rng = seeded(3);
    let widths = [3, 128, 128, 128, 2];
    let net = Mlp::init(&widths, &mut rng).unwrap();
    let cloud = mixture();
    let batch: Vec<TrainingPair> = cloud
        .points()
        .rows()
        .into_iter()
        .take(256)
        .map(|y| {
            let y = y.to_vec();
            let p = perturb(&mut rng, &y, 2.0, &sp).unwrap();
            TrainingPair::new(y, p, &sp).unwrap()
        })
        .collect();
    let input = prior_points(256, 1.0, &sp, 4);
    let input = ndarray::concatenate![ndarray::Axis(1), input, ndarray::Array2::<f64>::ones((256, 1))];
    c.bench_function("mlp forward 256 x [3,128,128,128,2]", |b| b.iter(|| net.forward(black_box(input.view())).unwrap()));
    let precond = Preconditioner::default();
    c.bench_function("preconditioned loss + grad, batch 256", |b| {
        b.iter(|| preconditioned_loss(&net, &precond, black_box(&batch), &sp).unwrap())
    });
}

fn wasserstein(c: &mut Criterion) {
    let sp = space(128.0);
    let a = prior_points(4096, 1.0, &sp, 5);
    let b_pts = prior_points(4096, 1.0, &sp, 6);
    c.bench_function("sliced wasserstein 4096 x 4096, 64 projections", |b| {
        b.iter_batched(|| seeded(7), |mut rng| sliced_wasserstein(a.view(), b_pts.view(), 64, &mut rng).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, kernel, oracle, network, wasserstein);
criterion_main!(benches);
