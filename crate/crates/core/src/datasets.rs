//! Toy point clouds.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::DataCloud;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Equal-weight isotropic Gaussians centred on a circle. With `balanced`
    /// (the default) point `i` belongs to mode `i % modes`; otherwise labels
    /// are drawn independently, giving i.i.d. draws from the mixture.
    GaussianMixture {
        modes: usize,
        radius: f64,
        std: f64,
        count: usize,
        seed: u64,
        #[serde(default = "default_balanced")]
        balanced: bool,
    },
    TwoMoons {
        noise: f64,
        count: usize,
        seed: u64,
    },
    /// Archimedean spiral `θ ∈ [0, 2π turns]`, radius growing linearly to 2.
    Spiral {
        turns: f64,
        noise: f64,
        count: usize,
        seed: u64,
    },
    /// Uniform over the dark cells of a `cells x cells` board on `[-2, 2]²`.
    Checkerboard {
        cells: usize,
        count: usize,
        seed: u64,
    },
    SinglePoint {
        point: Vec<f64>,
    },
    /// Numeric CSV, one row per point. A first row that does not parse as
    /// numbers is taken as a header.
    CsvFile {
        path: PathBuf,
    },
}

fn default_balanced() -> bool {
    true
}

impl DatasetSpec {
    /// Eight modes of std 0.1 on a radius-2 circle, 1024 points, seed 7.
    pub fn standard_mixture() -> Self {
        Self::GaussianMixture {
            modes: 8,
            radius: 2.0,
            std: 0.1,
            count: 1024,
            seed: 7,
            balanced: true,
        }
    }

    /// Ten points scattered around the unit circle.
    pub fn standard_ten_point() -> Self {
        Self::GaussianMixture {
            modes: 10,
            radius: 1.0,
            std: 0.25,
            count: 10,
            seed: 7,
            balanced: true,
        }
    }

    /// The same distribution with another seed and size, drawn i.i.d.; used
    /// for held-out reference sets.
    pub fn resampled(&self, count: usize, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        if let Self::GaussianMixture { balanced, .. } = &mut out {
            *balanced = false;
        }
        match &mut out {
            Self::GaussianMixture { count: c, seed: s, .. }
            | Self::TwoMoons { count: c, seed: s, .. }
            | Self::Spiral { count: c, seed: s, .. }
            | Self::Checkerboard { count: c, seed: s, .. } => {
                *c = count;
                *s = seed;
                Ok(out)
            }
            _ => Err(Error::InvalidConfig("dataset has no generator to resample".into())),
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(Error::InvalidConfig("dataset count must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")))
    }
}

pub fn mode_centers(modes: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..modes)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / modes as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

fn gaussian_mixture(modes: usize, radius: f64, std: f64, count: usize, seed: u64, balanced: bool) -> Result<Array2<f64>> {
    if modes == 0 {
        return Err(Error::InvalidConfig("mixture needs at least one mode".into()));
    }
    check_nonneg("std", std)?;
    check_nonneg("radius", radius)?;
    let centers = mode_centers(modes, radius);
    let mut rng = seeded(seed);
    let mut out = Array2::zeros((count, 2));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let k = if balanced { i % modes } else { rng.random_range(0..modes) };
        let c = centers[k];
        row[0] = c[0] + std * normal(&mut rng);
        row[1] = c[1] + std * normal(&mut rng);
    }
    Ok(out)
}

fn two_moons(noise: f64, count: usize, seed: u64) -> Result<Array2<f64>> {
    check_nonneg("noise", noise)?;
    let mut rng = seeded(seed);
    let mut out = Array2::zeros((count, 2));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let a = PI * rng.random::<f64>();
        let (x, y) = if i % 2 == 0 {
            (a.cos(), a.sin())
        } else {
            (1.0 - a.cos(), 0.5 - a.sin())
        };
        row[0] = x + noise * normal(&mut rng);
        row[1] = y + noise * normal(&mut rng);
    }
    Ok(out)
}

fn spiral(turns: f64, noise: f64, count: usize, seed: u64) -> Result<Array2<f64>> {
    check_nonneg("noise", noise)?;
    if !(turns > 0.0 && turns.is_finite()) {
        return Err(Error::InvalidConfig(format!("turns must be positive, got {turns}")));
    }
    let mut rng = seeded(seed);
    let mut out = Array2::zeros((count, 2));
    for mut row in out.rows_mut() {
        let s: f64 = rng.random();
        let theta = 2.0 * PI * turns * s;
        let rad = 2.0 * s;
        row[0] = rad * theta.cos() + noise * normal(&mut rng);
        row[1] = rad * theta.sin() + noise * normal(&mut rng);
    }
    Ok(out)
}

fn checkerboard(cells: usize, count: usize, seed: u64) -> Result<Array2<f64>> {
    if cells == 0 {
        return Err(Error::InvalidConfig("checkerboard needs at least one cell".into()));
    }
    let mut rng = seeded(seed);
    let size = 4.0 / cells as f64;
    let mut out = Array2::zeros((count, 2));
    for mut row in out.rows_mut() {
        loop {
            let x = rng.random_range(-2.0..2.0);
            let y = rng.random_range(-2.0..2.0);
            let (i, j) = (((x + 2.0) / size) as usize, ((y + 2.0) / size) as usize);
            if (i + j) % 2 == 0 {
                row[0] = x;
                row[1] = y;
                break;
            }
        }
    }
    Ok(out)
}

/// Parse a numeric CSV with a constant column count.
pub fn read_csv_points(path: &Path) -> Result<DataCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = i + 1;
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if i == 0 && !rec.is_empty() && parsed.iter().all(|p| p.is_err()) {
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::MalformedCsv {
                row: row_no,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(w);
        for (j, (p, raw)) in parsed.into_iter().zip(rec.iter()).enumerate() {
            match p {
                Ok(v) if v.is_finite() => vals.push(v),
                _ => {
                    return Err(Error::MalformedCsv {
                        row: row_no,
                        column: j + 1,
                        message: format!("not a finite number: {raw:?}"),
                    })
                }
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv dataset"));
    }
    DataCloud::from_rows(&rows)
}

pub fn make_dataset(spec: &DatasetSpec) -> Result<DataCloud> {
    let points = match spec {
        DatasetSpec::GaussianMixture {
            modes,
            radius,
            std,
            count,
            seed,
            balanced,
        } => {
            check_count(*count)?;
            gaussian_mixture(*modes, *radius, *std, *count, *seed, *balanced)?
        }
        DatasetSpec::TwoMoons { noise, count, seed } => {
            check_count(*count)?;
            two_moons(*noise, *count, *seed)?
        }
        DatasetSpec::Spiral {
            turns,
            noise,
            count,
            seed,
        } => {
            check_count(*count)?;
            spiral(*turns, *noise, *count, *seed)?
        }
        DatasetSpec::Checkerboard { cells, count, seed } => {
            check_count(*count)?;
            checkerboard(*cells, *count, *seed)?
        }
        DatasetSpec::SinglePoint { point } => return DataCloud::from_rows(std::slice::from_ref(point)),
        DatasetSpec::CsvFile { path } => return read_csv_points(path),
    };
    DataCloud::new(points)
}

/// Header `x0, x1, ...` then one row per point.
pub fn write_points_csv<W: std::io::Write>(w: W, points: ndarray::ArrayView2<'_, f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record((0..points.ncols()).map(|k| format!("x{k}")))?;
    for row in points.rows() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
