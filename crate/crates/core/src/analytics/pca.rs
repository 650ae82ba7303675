//! Principal-component regression baseline on raw pose chunks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_KEPT: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaLinReg {
    pub mean: DVector<f64>,
    /// Retained principal directions as columns (d × m).
    pub components: DMatrix<f64>,
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    /// Variance ratio of each retained component.
    pub explained: Vec<f64>,
}

impl PcaLinReg {
    /// Fits on `features` (one row per sample) keeping the fewest leading
    /// components whose cumulative variance ratio reaches `variance_kept`.
    pub fn fit(features: &DMatrix<f64>, targets: &[f64], variance_kept: f64) -> Result<PcaLinReg> {
        let (n, d) = features.shape();
        if n != targets.len() {
            return Err(Error::LengthMismatch { left: n, right: targets.len() });
        }
        if n < 2 {
            return Err(Error::TooFewVideos { got: n, needed: 2 });
        }
        if !(variance_kept > 0.0 && variance_kept <= 1.0) {
            return Err(Error::InvalidConfig(format!("variance ratio must lie in (0, 1], got {variance_kept}")));
        }
        let mean = DVector::from_iterator(d, features.column_iter().map(|c| c.mean()));
        let mut centered = features.clone();
        for (mut col, m) in centered.column_iter_mut().zip(mean.iter()) {
            col.add_scalar_mut(-m);
        }
        let svd = centered.clone().svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return right vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let var: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
        let total: f64 = var.iter().sum();
        let scale = features.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if total <= (1e-12 * scale).powi(2) * n as f64 {
            return Err(Error::DegenerateCovariance);
        }
        let mut kept = 0;
        let mut cum = 0.0;
        let mut explained = Vec::new();
        for v in &var {
            cum += v / total;
            kept += 1;
            explained.push(v / total);
            if cum >= variance_kept - 1e-12 {
                break;
            }
        }
        let components = DMatrix::from_fn(d, kept, |r, c| v_t[(order[c], r)]);
        let y_mean = targets.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, targets.iter().map(|t| t - y_mean));
        let z = &centered * &components;
        // score columns are orthogonal, so least squares decouples per component
        let coefficients = DVector::from_iterator(kept, (0..kept).map(|j| {
            let col = z.column(j);
            let ss = col.norm_squared();
            if ss > 0.0 { col.dot(&yc) / ss } else { 0.0 }
        }));
        Ok(PcaLinReg { mean, components, coefficients, intercept: y_mean, explained })
    }

    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::WidthMismatch { expected: self.mean.len(), got: features.ncols() });
        }
        let w = &self.components * &self.coefficients;
        Ok(features
            .row_iter()
            .map(|row| self.intercept + row.iter().zip(self.mean.iter()).zip(w.iter()).map(|((x, m), w)| (x - m) * w).sum::<f64>())
            .collect())
    }
}
