use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Finite set of clean points `y_i` with uniform weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCloud {
    points: Array2<f64>,
}

impl DataCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Empty("data cloud"));
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidConfig("cloud points must have dimension >= 1".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("cloud contains non-finite values".into()));
        }
        Ok(Self {
            points: points.as_standard_layout().into_owned(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("data cloud"))?;
        let dim = first.len();
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            crate::error::ensure_dim(dim, row.len())?;
            flat.extend_from_slice(row);
        }
        let points = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let d2: f64 = self
                    .point(i)
                    .iter()
                    .zip(self.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }
}
