//! JSON checkpoint container.
//!
//! ```json
//! {
//!   "format": "pfgmpp-checkpoint",
//!   "version": 1,
//!   "kind": "edm",
//!   "space": { "n_data": 2, "d_aug": 128.0 },
//!   "sigma_data": 0.5,
//!   "ddpm": null,
//!   "widths": [3, 128, 128, 128, 2],
//!   "arrays": [
//!     { "name": "params.layers.0.weight", "shape": [128, 3], "data": [ ... ] },
//!     ...
//!     { "name": "ema.layers.0.weight", "shape": [128, 3], "data": [ ... ] }
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::space::SpaceConfig;
use crate::trainer::DdpmSchedule;

pub const FORMAT: &str = "pfgmpp-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Preconditioned denoiser, network input `[c_in x, c_noise]`.
    Edm,
    /// Raw noise predictor, network input `[x, t]`.
    Ddpm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Container {
    format: String,
    version: u32,
    kind: ModelKind,
    space: SpaceConfig,
    sigma_data: f64,
    ddpm: Option<DdpmSchedule>,
    widths: Vec<usize>,
    arrays: Vec<NamedArray>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub space: SpaceConfig,
    pub sigma_data: f64,
    pub ddpm: Option<DdpmSchedule>,
    pub net: Mlp,
    pub ema: Option<Mlp>,
}

fn push_arrays(out: &mut Vec<NamedArray>, prefix: &str, net: &Mlp) {
    for (name, shape, data) in net.named_arrays() {
        out.push(NamedArray {
            name: format!("{prefix}.{name}"),
            shape,
            data: data.to_vec(),
        });
    }
}

fn collect_params(arrays: &[NamedArray], prefix: &str, template: &Mlp) -> Result<Option<Vec<f64>>> {
    let mut params = Vec::with_capacity(template.num_params());
    let mut found = 0;
    for (name, shape, _) in template.named_arrays() {
        let full = format!("{prefix}.{name}");
        match arrays.iter().find(|a| a.name == full) {
            Some(a) => {
                if a.shape != shape || a.data.len() != shape.iter().product::<usize>() {
                    return Err(Error::Checkpoint(format!("array {full} has wrong shape {:?}", a.shape)));
                }
                params.extend_from_slice(&a.data);
                found += 1;
            }
            None if found == 0 => continue,
            None => return Err(Error::Checkpoint(format!("missing array {full}"))),
        }
    }
    if found == 0 {
        return Ok(None);
    }
    if found != template.named_arrays().len() {
        return Err(Error::Checkpoint(format!("incomplete parameter set {prefix}")));
    }
    Ok(Some(params))
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        if self.net.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("parameters must be finite".into()));
        }
        let mut arrays = Vec::new();
        push_arrays(&mut arrays, "params", &self.net);
        if let Some(ema) = &self.ema {
            push_arrays(&mut arrays, "ema", ema);
        }
        let c = Container {
            format: FORMAT.into(),
            version: VERSION,
            kind: self.kind,
            space: self.space,
            sigma_data: self.sigma_data,
            ddpm: self.ddpm,
            widths: self.net.widths().to_vec(),
            arrays,
        };
        let mut s = serde_json::to_string(&c)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Container = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container {} v{}",
                c.format, c.version
            )));
        }
        c.space.validate()?;
        let template = Mlp::zeros(&c.widths)?;
        let params = collect_params(&c.arrays, "params", &template)?
            .ok_or_else(|| Error::Checkpoint("missing params arrays".into()))?;
        let net = Mlp::from_params(&c.widths, params)?;
        let ema = collect_params(&c.arrays, "ema", &template)?
            .map(|p| Mlp::from_params(&c.widths, p))
            .transpose()?;
        Ok(Self {
            kind: c.kind,
            space: c.space,
            sigma_data: c.sigma_data,
            ddpm: c.ddpm,
            net,
            ema,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Checkpoint(format!("checkpoint not found: {}", path.display())));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
