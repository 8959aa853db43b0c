//! Poisson flow generative models with `D` augmented dimensions.
//!
//! Data live in `R^N`; the `D` extra dimensions enter only through their norm
//! `r`. Small `D` gives heavy-tailed perturbations, and `D -> inf` recovers
//! Gaussian diffusion under the alignment `r = σ sqrt(D)`.
//!
//! ```
//! use pfgmpp::{DataCloud, OracleDrift, SpaceConfig, SamplerSchedule, sample_heun, Injection};
//! use pfgmpp::rng::seeded;
//!
//! let space = SpaceConfig::finite(2, 16.0).unwrap();
//! let cloud = DataCloud::from_rows(&[vec![1.0, -1.0]]).unwrap();
//! let drift = OracleDrift::new(cloud, space).unwrap();
//! let schedule = SamplerSchedule::from_sigmas(80.0, 0.002, 7.0, 18, &space).unwrap();
//! let samples = sample_heun(&drift, &schedule, 4, &mut seeded(0), Injection::NONE, &space).unwrap();
//! assert!((samples[[0, 0]] - 1.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analysis;
pub mod cloud;
pub mod datasets;
pub mod error;
pub mod field;
pub mod kernel;
pub mod nn;
pub mod objective;
pub mod rng;
pub mod sampler;
pub mod space;
pub mod trainer;

pub use cloud::DataCloud;
pub use datasets::{make_dataset, DatasetSpec};
pub use error::{Error, Result};
pub use field::{DriftBackend, NetworkDrift, OracleDrift};
pub use kernel::{perturb, radius_pdf, sample_prior, sample_radius, RadiusLaw};
pub use nn::{Checkpoint, Denoiser, Mlp, ModelKind, NoisePredictor, PreconditionedDenoiser, Preconditioner};
pub use objective::TrainingPair;
pub use sampler::{build_schedule, heun_solve, sample_heun, Injection, NoiseScale, SamplerSchedule};
pub use space::{Augmentation, AugmentedPoint, SpaceConfig};
pub use trainer::{train, DdpmSchedule, TrainConfig, TrainMode, TrainOutcome};
