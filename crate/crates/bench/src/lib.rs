//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use pfgmpp::rng::seeded;
use pfgmpp::sampler::prior_batch;
use pfgmpp::{make_dataset, DataCloud, DatasetSpec, SpaceConfig};

pub fn mixture() -> DataCloud {
    make_dataset(&DatasetSpec::standard_mixture()).expect("standard mixture builds")
}

pub fn space(d: f64) -> SpaceConfig {
    SpaceConfig::finite(2, d).expect("valid space")
}

/// `count` draws from the prior at anchor `r`.
pub fn prior_points(count: usize, r: f64, space: &SpaceConfig, seed: u64) -> Array2<f64> {
    prior_batch(&mut seeded(seed), count, r, space).expect("prior draws")
}
