use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear regression with evidence-maximized noise precision `alpha` and
/// weight precision `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub n_iter: usize,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    fn intercept_only(y_mean: f64, d: usize) -> Self {
        RidgeFit {
            weights: vec![0.0; d],
            intercept: y_mean,
            alpha: 1.0,
            lambda: 1.0,
            n_iter: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidgeOptions {
    pub max_iter: usize,
    /// Stop once the relative change of both precisions falls below this.
    pub tol: f64,
    /// Gamma prior shape/rate on `alpha`.
    pub alpha_1: f64,
    pub alpha_2: f64,
    /// Gamma prior shape/rate on `lambda`.
    pub lambda_1: f64,
    pub lambda_2: f64,
}

impl Default for BayesianRidgeOptions {
    fn default() -> Self {
        BayesianRidgeOptions {
            max_iter: 300,
            tol: 1e-4,
            alpha_1: 1e-6,
            alpha_2: 1e-6,
            lambda_1: 1e-6,
            lambda_2: 1e-6,
        }
    }
}

pub fn fit_bayesian_ridge(x: &Matrix, y: &[f64]) -> Result<RidgeFit> {
    fit_bayesian_ridge_with(x, y, &BayesianRidgeOptions::default())
}

pub fn fit_bayesian_ridge_with(
    x: &Matrix,
    y: &[f64],
    opts: &BayesianRidgeOptions,
) -> Result<RidgeFit> {
    let n = x.n_rows();
    let d = x.n_cols();
    if y.len() != n {
        return Err(Error::invalid(format!("{} targets for {n} rows", y.len())));
    }
    if n < 2 {
        return Err(Error::invalid("bayesian ridge needs at least 2 rows"));
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::data("bayesian ridge input contains non-finite values"));
    }
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / nf;
    if y_var == 0.0 || d == 0 {
        return Ok(RidgeFit::intercept_only(y_mean, d));
    }

    let mut x_mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= nf);

    // Gram matrix and cross products of the centered data.
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut yty = 0.0;
    let mut centered = vec![0.0; d];
    for (row, &yv) in x.rows().zip(y) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = yv - y_mean;
        yty += yc * yc;
        for i in 0..d {
            let ci = centered[i];
            xty[i] += ci * yc;
            for j in i..d {
                gram[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }

    let eig = SymmetricEigen::new(gram.clone());
    let evals: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
    let vt_b = eig.eigenvectors.transpose() * &xty;
    let solve = |ratio: f64| -> DVector<f64> {
        let scaled = DVector::from_iterator(d, (0..d).map(|i| vt_b[i] / (evals[i] + ratio)));
        &eig.eigenvectors * scaled
    };

    let mut alpha = 1.0 / y_var;
    let mut lambda = 1.0;
    let mut n_iter = 0;
    for it in 1..=opts.max_iter {
        n_iter = it;
        let w = solve(lambda / alpha);
        let rss = (yty - 2.0 * w.dot(&xty) + w.dot(&(&gram * &w))).max(0.0);
        let gamma: f64 = evals
            .iter()
            .map(|&e| alpha * e / (lambda + alpha * e))
            .sum();
        let new_lambda = (gamma + 2.0 * opts.lambda_1) / (w.norm_squared() + 2.0 * opts.lambda_2);
        let new_alpha = (nf - gamma + 2.0 * opts.alpha_1) / (rss + 2.0 * opts.alpha_2);
        let d_alpha = ((new_alpha - alpha) / alpha).abs();
        let d_lambda = ((new_lambda - lambda) / lambda).abs();
        alpha = new_alpha;
        lambda = new_lambda;
        if d_alpha < opts.tol && d_lambda < opts.tol {
            break;
        }
    }
    let w = solve(lambda / alpha);
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    if weights.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
        return Err(Error::Degenerate("bayesian ridge produced non-finite weights".into()));
    }
    Ok(RidgeFit {
        weights,
        intercept,
        alpha,
        lambda,
        n_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn constant_target_gives_intercept_only() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 1.0], [0.5, 0.5]]).unwrap();
        let fit = fit_bayesian_ridge(&x, &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(fit.intercept, 5.0);
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn noiseless_slope_two() {
        // Closed-form least squares on y = 2x has slope exactly 2; the
        // evidence-maximized ridge must land within 1e-2 of it.
        let xs: Vec<[f64; 1]> = (0..50).map(|i| [i as f64 / 10.0]).collect();
        let y: Vec<f64> = xs.iter().map(|r| 2.0 * r[0]).collect();
        let fit = fit_bayesian_ridge(&Matrix::from_rows(&xs).unwrap(), &y).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-2, "{:?}", fit);
        assert!(fit.intercept.abs() < 1e-2);
    }

    #[test]
    fn collinear_columns_stay_finite() {
        let mut r = rng::seeded(4);
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|_| {
                let v: f64 = r.random();
                [v, v]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let fit = fit_bayesian_ridge(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        assert!(fit.weights.iter().all(|w| w.is_finite()));
        assert!(fit.lambda > 0.0);
        // The two copies share the slope.
        assert!((fit.weights[0] + fit.weights[1] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn matches_closed_form_ridge_at_fixed_precisions() {
        // At the returned (alpha, lambda) the weights solve
        // (X'X + lambda/alpha I) w = X'y on centered data.
        let mut r = rng::seeded(11);
        let rows: Vec<[f64; 3]> = (0..60)
            .map(|_| [r.random(), r.random(), r.random()])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|v| v[0] - 2.0 * v[1] + 0.5 * v[2] + 0.1 * r.random::<f64>())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let fit = fit_bayesian_ridge(&x, &y).unwrap();
        let n = 60.0;
        let mx: Vec<f64> = (0..3).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
        let my = y.iter().sum::<f64>() / n;
        let ratio = fit.lambda / fit.alpha;
        for i in 0..3 {
            let mut lhs = ratio * fit.weights[i];
            let mut rhs = 0.0;
            for (row, yv) in rows.iter().zip(&y) {
                let ci = row[i] - mx[i];
                rhs += ci * (yv - my);
                for j in 0..3 {
                    lhs += ci * (row[j] - mx[j]) * fit.weights[j];
                }
            }
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }
}
