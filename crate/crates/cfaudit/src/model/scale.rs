//! Per-column standardization for gradient-trained models. Scalar columns
//! are shifted and scaled by train statistics; one-hot columns pass through.

use serde::{Deserialize, Serialize};

use crate::data::EncodedLayout;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fit on train rows. Constant columns get std 1.0 so they standardize
    /// to a constant 0 instead of dividing by zero.
    pub fn fit(x: &[Vec<f64>], layout: &EncodedLayout) -> Standardizer {
        let width = layout.width();
        let mut mean = vec![0.0; width];
        let mut std = vec![1.0; width];
        if x.is_empty() {
            return Standardizer { mean, std };
        }
        let n = x.len() as f64;
        for &col in &layout.scalar_columns() {
            let m = x.iter().map(|r| r[col]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[col] - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean[col] = m;
            std[col] = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply(r)).collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable binary cross-entropy from the logit.
pub(crate) fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}
