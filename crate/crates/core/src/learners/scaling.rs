//! Per-feature standardisation used by the linear learners.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Constant columns keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix, w: &[f64]) -> Self {
        let total: f64 = w.iter().sum();
        let p = x.n_cols();
        let mut mean = vec![0.0; p];
        for (i, row) in x.rows().enumerate() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += w[i] * v / total;
            }
        }
        let mut var = vec![0.0; p];
        for (i, row) in x.rows().enumerate() {
            for ((s, m), v) in var.iter_mut().zip(&mean).zip(row) {
                *s += w[i] * (v - m) * (v - m) / total;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(0, x.n_cols());
        for row in x.rows() {
            out.push_row(&self.transform_row(row));
        }
        out
    }

    /// Map a linear function of scaled inputs back to raw inputs.
    pub fn unscale(&self, b0: f64, b: &[f64]) -> (f64, Vec<f64>) {
        let coef: Vec<f64> = b.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let shift: f64 = coef.iter().zip(&self.mean).map(|(c, m)| c * m).sum();
        (b0 - shift, coef)
    }
}
