//! Data/augmentation dimensions and augmented points.
//!
//! A [`SpaceConfig`] pairs the data dimension `N` with the augmentation
//! dimension `D`. `D` is either a finite positive real or the Gaussian limit
//! `D -> inf`. In the Gaussian limit the anchor `r` is read directly as the
//! noise scale `sigma`, so every `r <-> sigma` conversion in the crate goes
//! through [`SpaceConfig::sqrt_d`], which is `1` in that mode.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Augmentation dimension: finite `D > 0` or the diffusion limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augmentation {
    Finite(f64),
    GaussianLimit,
}

impl Serialize for Augmentation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Augmentation::Finite(d) => s.serialize_f64(*d),
            Augmentation::GaussianLimit => s.serialize_str("gaussian"),
        }
    }
}

impl<'de> Deserialize<'de> for Augmentation {
    fn deserialize<De: Deserializer<'de>>(de: De) -> std::result::Result<Self, De::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Name(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(d) => Ok(Augmentation::Finite(d)),
            Repr::Name(s) if s == "gaussian" || s == "inf" => Ok(Augmentation::GaussianLimit),
            Repr::Name(s) => Err(serde::de::Error::custom(format!(
                "d_aug must be a positive number or \"gaussian\", got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Augmentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Augmentation::Finite(d) => write!(f, "{d}"),
            Augmentation::GaussianLimit => f.write_str("gaussian"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub n_data: usize,
    pub d_aug: Augmentation,
}

impl SpaceConfig {
    pub fn finite(n_data: usize, d_aug: f64) -> Result<Self> {
        let s = Self {
            n_data,
            d_aug: Augmentation::Finite(d_aug),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(n_data: usize) -> Result<Self> {
        let s = Self {
            n_data,
            d_aug: Augmentation::GaussianLimit,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 {
            return Err(Error::InvalidConfig("n_data must be at least 1".into()));
        }
        if let Augmentation::Finite(d) = self.d_aug {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "d_aug must be a finite positive real, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.d_aug, Augmentation::GaussianLimit)
    }

    /// Finite `D`, or `None` in the Gaussian limit.
    pub fn d(&self) -> Option<f64> {
        match self.d_aug {
            Augmentation::Finite(d) => Some(d),
            Augmentation::GaussianLimit => None,
        }
    }

    /// `sqrt(D)`; `1` in the Gaussian limit where `r` already is `sigma`.
    pub fn sqrt_d(&self) -> f64 {
        self.d().map_or(1.0, f64::sqrt)
    }

    /// Alignment rule `r = sigma * sqrt(D)`.
    pub fn r_of_sigma(&self, sigma: f64) -> f64 {
        sigma * self.sqrt_d()
    }

    pub fn sigma_of_r(&self, r: f64) -> f64 {
        r / self.sqrt_d()
    }

    /// Kernel exponent `(N + D) / 2`.
    pub(crate) fn half_total(&self) -> Option<f64> {
        self.d().map(|d| 0.5 * (self.n_data as f64 + d))
    }
}

/// Data vector `x` with its anchor `r = ||z||`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    pub x: Vec<f64>,
    pub r: f64,
}

impl AugmentedPoint {
    pub fn new(x: Vec<f64>, r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidConfig(format!("anchor must be >= 0, got {r}")));
        }
        Ok(Self { x, r })
    }

    pub fn check(&self, space: &SpaceConfig) -> Result<()> {
        crate::error::ensure_dim(space.n_data, self.x.len())
    }
}
