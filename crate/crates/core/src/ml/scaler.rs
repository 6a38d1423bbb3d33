use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature range seen during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Column-wise minimum and maximum of `rows`.
pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<ScalerBounds> {
    let Some(first) = rows.first() else {
        return Err(Error::Config("cannot fit a scaler on zero rows".into()));
    };
    let mut min = first.clone();
    let mut max = first.clone();
    for row in &rows[1..] {
        if row.len() != min.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                actual: row.len(),
            });
        }
        for (d, &v) in row.iter().enumerate() {
            min[d] = min[d].min(v);
            max[d] = max[d].max(v);
        }
    }
    Ok(ScalerBounds { min, max })
}

impl ScalerBounds {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(x − min)/(max − min)`; constant features map to 0.5. Values outside
    /// the fitted range are not clamped.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(d, &v)| self.scale(d, v))
            .collect())
    }

    pub fn scale(&self, d: usize, v: f64) -> f64 {
        let span = self.max[d] - self.min[d];
        if span > 0.0 {
            (v - self.min[d]) / span
        } else {
            0.5
        }
    }

    pub fn inverse(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(d, &v)| {
                let span = self.max[d] - self.min[d];
                if span > 0.0 {
                    self.min[d] + v * span
                } else {
                    self.min[d]
                }
            })
            .collect())
    }

    /// Bounds restricted to the given feature columns.
    pub fn select(&self, columns: &[usize]) -> ScalerBounds {
        ScalerBounds {
            min: columns.iter().map(|&c| self.min[c]).collect(),
            max: columns.iter().map(|&c| self.max[c]).collect(),
        }
    }
}

pub fn apply_scaler(b: &ScalerBounds, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| b.transform(r)).collect()
}
