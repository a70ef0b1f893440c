//! Per-feature z-scoring fitted on training rows.

use crate::error::{bail, Result};

pub const SCALE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl FeatureScaler {
    /// Mean and population standard deviation per column. A constant column
    /// is shifted by its own value so it maps to exactly 0.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            bail!(Argument, "scaler needs at least 2 rows, got {}", rows.len());
        }
        let w = rows[0].len();
        if rows.iter().any(|r| r.len() != w) {
            bail!(Argument, "feature rows have differing widths");
        }
        let n = rows.len() as f64;
        let mut shift = Vec::with_capacity(w);
        let mut scale = Vec::with_capacity(w);
        for j in 0..w {
            let first = rows[0][j];
            if rows.iter().all(|r| r[j] == first) {
                shift.push(first);
                scale.push(SCALE_FLOOR);
                continue;
            }
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            shift.push(mean);
            scale.push(var.sqrt().max(SCALE_FLOOR));
        }
        Ok(Self { shift, scale })
    }

    pub fn from_parts(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            bail!(Argument, "scaler has {} shifts and {} scales", shift.len(), scale.len());
        }
        if scale.iter().any(|&s| !(s >= SCALE_FLOOR) || !s.is_finite()) {
            bail!(Argument, "scaler scales must be finite and at least {SCALE_FLOOR}");
        }
        if shift.iter().any(|s| !s.is_finite()) {
            bail!(Argument, "scaler shifts must be finite");
        }
        Ok(Self { shift, scale })
    }

    pub fn width(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            bail!(Argument, "row of width {} for a scaler of width {}", row.len(), self.width());
        }
        Ok(row
            .iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_training_columns() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.37 + 4.0, ((i * 7) % 13) as f64, 2.5])
            .collect();
        let s = FeatureScaler::fit(&rows).unwrap();
        let out = s.transform(&rows).unwrap();
        for j in 0..2 {
            let mean = out.iter().map(|r| r[j]).sum::<f64>() / 50.0;
            let var = out.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-6);
        }
        assert!(out.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn uses_training_statistics() {
        let train = vec![vec![0.0], vec![2.0]];
        let s = FeatureScaler::fit(&train).unwrap();
        assert_eq!(s.transform_row(&[10.0]).unwrap(), vec![9.0]);
        assert!(FeatureScaler::fit(&train[..1]).is_err());
        assert!(s.transform_row(&[1.0, 2.0]).is_err());
    }
}
