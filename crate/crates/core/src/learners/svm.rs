//! Linear SVM: hinge loss plus L2 penalty, minimised by full-batch
//! subgradient descent, with Platt scaling for probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::scaling::Standardizer;
use super::{check_fit_inputs, sigmoid, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub eta0: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 1000,
            eta0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    /// Hyperplane on the original feature scale.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: f64,
    /// p(class 1) = σ(platt_a · f + platt_b)
    pub platt_a: f64,
    pub platt_b: f64,
}

impl LinearSvmModel {
    pub fn decision_function(&self, row: &[f64]) -> f64 {
        self.bias + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Classifier for LinearSvmModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(self.platt_a * self.decision_function(row) + self.platt_b);
        [1.0 - p, p]
    }
}

fn objective(wt: &[f64], b: f64, x: &Matrix, s: &[f64], w: &[f64], lambda: f64, total: f64) -> f64 {
    let hinge: f64 = (0..x.n_rows())
        .map(|i| {
            let f = b + x.row(i).iter().zip(wt).map(|(a, c)| a * c).sum::<f64>();
            w[i] * (1.0 - s[i] * f).max(0.0)
        })
        .sum();
    0.5 * lambda * wt.iter().map(|v| v * v).sum::<f64>() + hinge / total
}

/// Platt's sigmoid fit on decision values, with his smoothed targets.
pub fn platt_scale(f: &[f64], y: &[u8], w: &[f64]) -> (f64, f64) {
    let n_pos: f64 = y.iter().zip(w).filter(|(c, _)| **c == 1).map(|(_, w)| w).sum();
    let n_neg: f64 = w.iter().sum::<f64>() - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = y.iter().map(|&c| if c == 1 { hi } else { lo }).collect();
    let loss = |a: f64, b: f64| -> f64 {
        (0..f.len())
            .map(|i| {
                let z = a * f[i] + b;
                let log_p = if z >= 0.0 { -(-z).exp().ln_1p() } else { z - z.exp().ln_1p() };
                let log_q = if z >= 0.0 { -z - (-z).exp().ln_1p() } else { -z.exp().ln_1p() };
                -w[i] * (t[i] * log_p + (1.0 - t[i]) * log_q)
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut cur = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for i in 0..f.len() {
            let p = sigmoid(a * f[i] + b);
            let r = w[i] * (p - t[i]);
            let h = w[i] * p * (1.0 - p);
            ga += r * f[i];
            gb += r;
            haa += h * f[i] * f[i];
            hab += h * f[i];
            hbb += h;
        }
        if ga.abs().max(gb.abs()) < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 1e-18 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            let l = loss(na, nb);
            if l < cur {
                a = na;
                b = nb;
                cur = l;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

pub fn train_linear_svm(x: &Matrix, y: &[u8], w: Option<&[f64]>, params: &SvmParams) -> Result<LinearSvmModel> {
    check_fit_inputs(x, y, w)?;
    if !(params.c > 0.0 && params.eta0 > 0.0) {
        return Err(Error::invalid("C and eta0 must be positive"));
    }
    let w: Vec<f64> = w.map_or_else(|| vec![1.0; y.len()], <[f64]>::to_vec);
    let total: f64 = w.iter().sum();
    let scaler = Standardizer::fit(x, &w);
    let xs = scaler.transform(x);
    let s: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
    let lambda = 1.0 / (params.c * total);
    let p = x.n_cols();
    let (mut wt, mut b) = (vec![0.0; p], 0.0);
    let mut best = (objective(&wt, b, &xs, &s, &w, lambda, total), wt.clone(), b);
    for t in 1..=params.epochs {
        let mut gw: Vec<f64> = wt.iter().map(|v| lambda * v).collect();
        let mut gb = 0.0;
        for i in 0..xs.n_rows() {
            let row = xs.row(i);
            let f = b + row.iter().zip(&wt).map(|(a, c)| a * c).sum::<f64>();
            if s[i] * f < 1.0 {
                let k = w[i] * s[i] / total;
                for (g, v) in gw.iter_mut().zip(row) {
                    *g -= k * v;
                }
                gb -= k;
            }
        }
        let eta = params.eta0 / (t as f64).sqrt();
        for (v, g) in wt.iter_mut().zip(&gw) {
            *v -= eta * g;
        }
        b -= eta * gb;
        let obj = objective(&wt, b, &xs, &s, &w, lambda, total);
        if obj < best.0 {
            best = (obj, wt.clone(), b);
        }
    }
    let (bias, weights) = scaler.unscale(best.2, &best.1);
    let mut model = LinearSvmModel {
        weights,
        bias,
        regularization: lambda,
        platt_a: 1.0,
        platt_b: 0.0,
    };
    let f: Vec<f64> = (0..x.n_rows()).map(|i| model.decision_function(x.row(i))).collect();
    let (a, pb) = platt_scale(&f, y, &w);
    model.platt_a = a;
    model.platt_b = pb;
    Ok(model)
}
