//! Local surrogate explanations for a single prediction.
//!
//! Each feature is discretised into training quartile bins. Perturbations
//! resample features from their training marginals, get represented as
//! "same bin as the instance" indicators, and a kernel-weighted ridge fit
//! from those indicators to the model's probability gives one signed weight
//! per feature rule.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Classifier;
use crate::matrix::Matrix;
use crate::rng;
use crate::tabular::{Dataset, CONTENT};

/// Training values kept per feature for perturbation sampling.
pub const MARGINAL_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub code: String,
    /// The 25th, 50th and 75th percentiles; empty for a constant feature.
    pub boundaries: Vec<f64>,
    /// Sorted training values, thinned to at most [`MARGINAL_CAP`].
    pub marginal: Vec<f64>,
}

impl FeatureBins {
    pub fn is_constant(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// Bin index: the number of boundaries strictly below `v`.
    pub fn bin(&self, v: f64) -> usize {
        if self.is_constant() {
            return usize::from(v != self.marginal[0]);
        }
        self.boundaries.iter().filter(|&&b| b < v).count()
    }

    /// The rule describing the bin that holds `v`.
    pub fn rule(&self, v: f64) -> String {
        let code = &self.code;
        if self.is_constant() {
            return format!("{code} = {}", fmt_value(v));
        }
        let lower = self.boundaries.iter().rev().find(|&&b| b < v);
        let upper = self.boundaries.iter().find(|&&b| b >= v);
        match (lower, upper) {
            (None, Some(u)) => format!("{code} <= {u:.2}"),
            (Some(l), None) => format!("{code} > {l:.2}"),
            (Some(l), Some(u)) => format!("{l:.2} < {code} <= {u:.2}"),
            (None, None) => unreachable!("non-constant feature has boundaries"),
        }
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerStats {
    pub features: Vec<FeatureBins>,
}

impl DiscretizerStats {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn codes(&self) -> Vec<String> {
        self.features.iter().map(|f| f.code.clone()).collect()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn thin(sorted: &[f64]) -> Vec<f64> {
    if sorted.len() <= MARGINAL_CAP {
        return sorted.to_vec();
    }
    let step = (sorted.len() - 1) as f64 / (MARGINAL_CAP - 1) as f64;
    (0..MARGINAL_CAP)
        .map(|i| sorted[(i as f64 * step).round() as usize])
        .collect()
}

pub fn fit_discretizer(train: &Dataset) -> Result<DiscretizerStats> {
    if train.missing_count() > 0 {
        return Err(Error::data("discretizer needs a dataset without missing cells"));
    }
    if train.n_rows() == 0 {
        return Err(Error::data("discretizer needs at least one row"));
    }
    let features = train
        .features()
        .iter()
        .enumerate()
        .map(|(c, meta)| {
            let mut col = train.values().column(c);
            col.sort_by(f64::total_cmp);
            let constant = col[0] == col[col.len() - 1];
            FeatureBins {
                code: meta.code.clone(),
                boundaries: if constant {
                    Vec::new()
                } else {
                    [0.25, 0.5, 0.75].iter().map(|&q| quantile(&col, q)).collect()
                },
                marginal: thin(&col),
            }
        })
        .collect();
    Ok(DiscretizerStats { features })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub n_samples: usize,
    /// Defaults to `0.75·√d`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    /// Class whose probability the surrogate models.
    pub class: u8,
    pub seed: u64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            n_samples: 5000,
            kernel_width: None,
            ridge_lambda: 1.0,
            class: CONTENT,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: usize,
    pub code: String,
    pub rule: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// (p_discontent, p_content) straight from the model.
    pub class_probs: [f64; 2],
    pub explained_class: u8,
    /// Sorted by |weight|, largest first.
    pub contributions: Vec<Contribution>,
    pub intercept: f64,
    /// Surrogate output at the instance itself.
    pub local_prediction: f64,
    /// Weighted R² of the surrogate on its perturbations.
    pub fidelity: f64,
}

impl Explanation {
    /// Surrogate output for one binary row in feature order.
    pub fn surrogate(&self, z: &[f64]) -> f64 {
        self.intercept
            + self
                .contributions
                .iter()
                .map(|c| c.weight * z[c.feature])
                .sum::<f64>()
    }

    pub fn top(&self, k: usize) -> &[Contribution] {
        &self.contributions[..k.min(self.contributions.len())]
    }
}

/// The perturbation set behind an explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbations {
    /// Raw feature values; row 0 is the instance.
    pub data: Matrix,
    /// Same-bin indicators.
    pub binary: Matrix,
    pub weights: Vec<f64>,
}

pub fn explain_instance<M: Classifier + Sync + ?Sized>(
    model: &M,
    instance: &[f64],
    stats: &DiscretizerStats,
    opts: &ExplainOptions,
) -> Result<Explanation> {
    explain_with_samples(model, instance, stats, opts).map(|(e, _)| e)
}

pub fn explain_with_samples<M: Classifier + Sync + ?Sized>(
    model: &M,
    instance: &[f64],
    stats: &DiscretizerStats,
    opts: &ExplainOptions,
) -> Result<(Explanation, Perturbations)> {
    let d = stats.n_features();
    if instance.len() != d || model.n_features() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: if instance.len() != d { instance.len() } else { model.n_features() },
        });
    }
    if opts.n_samples < 10 {
        return Err(Error::invalid(format!(
            "explanations need at least 10 perturbations, got {}",
            opts.n_samples
        )));
    }
    if opts.class > 1 {
        return Err(Error::invalid("explained class must be 0 or 1"));
    }
    if instance.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("instance has non-finite values"));
    }
    let width = opts.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("kernel width {width} must be positive")));
    }

    let samples = perturb(instance, stats, opts.n_samples, opts.seed);
    let home: Vec<usize> = stats.features.iter().zip(instance).map(|(f, &v)| f.bin(v)).collect();
    let mut binary = Matrix::zeros(samples.n_rows(), d);
    for r in 0..samples.n_rows() {
        for (j, f) in stats.features.iter().enumerate() {
            binary.set(r, j, f64::from(u8::from(f.bin(samples.get(r, j)) == home[j])));
        }
    }
    if binary.rows().all(|z| z.iter().all(|&v| v == 1.0)) {
        return Err(Error::Degenerate(
            "every perturbation fell into the instance's bins".into(),
        ));
    }
    let weights: Vec<f64> = binary
        .rows()
        .map(|z| {
            let dist2 = z.iter().filter(|&&v| v == 0.0).count() as f64;
            (-dist2 / (width * width)).exp()
        })
        .collect();

    let class_probs = model.proba_row(instance);
    let target: Vec<f64> = (0..samples.n_rows())
        .into_par_iter()
        .map(|r| {
            if r == 0 {
                class_probs[opts.class as usize]
            } else {
                model.proba_row(samples.row(r))[opts.class as usize]
            }
        })
        .collect();

    let (intercept, coef) = weighted_ridge(&binary, &target, &weights, opts.ridge_lambda)?;
    let mut contributions: Vec<Contribution> = stats
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| Contribution {
            feature: j,
            code: f.code.clone(),
            rule: f.rule(instance[j]),
            weight: coef[j],
        })
        .collect();
    contributions.sort_by(|a, b| {
        b.weight
            .abs()
            .total_cmp(&a.weight.abs())
            .then(a.feature.cmp(&b.feature))
    });
    let mut explanation = Explanation {
        class_probs,
        explained_class: opts.class,
        contributions,
        intercept,
        local_prediction: intercept + coef.iter().sum::<f64>(),
        fidelity: 0.0,
    };
    let perturbations = Perturbations {
        data: samples,
        binary,
        weights,
    };
    explanation.fidelity = weighted_r2(&explanation, &perturbations, &target);
    Ok((explanation, perturbations))
}

/// Row 0 is the instance; later rows resample each feature with
/// probability ½.
fn perturb(instance: &[f64], stats: &DiscretizerStats, n: usize, seed: u64) -> Matrix {
    let mut rng = rng::seeded(seed);
    let mut out = Matrix::zeros(n, instance.len());
    out.row_mut(0).copy_from_slice(instance);
    for r in 1..n {
        let row = out.row_mut(r);
        for (j, f) in stats.features.iter().enumerate() {
            row[j] = if rng.random_bool(0.5) {
                f.marginal[rng.random_range(0..f.marginal.len())]
            } else {
                instance[j]
            };
        }
    }
    out
}

/// Ridge with an unpenalised intercept, solved on weighted-centred data.
fn weighted_ridge(x: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    let (n, d) = (x.n_rows(), x.n_cols());
    let sw: f64 = w.iter().sum();
    let x_mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|r| w[r] * x.get(r, j)).sum::<f64>() / sw)
        .collect();
    let y_mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for r in 0..n {
        let xc: Vec<f64> = (0..d).map(|j| x.get(r, j) - x_mean[j]).collect();
        let yc = y[r] - y_mean;
        for i in 0..d {
            b[i] += w[r] * xc[i] * yc;
            for j in i..d {
                a[(i, j)] += w[r] * xc[i] * xc[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
        a[(i, i)] += lambda;
    }
    let coef = a
        .cholesky()
        .ok_or_else(|| Error::Degenerate("surrogate system is not positive definite".into()))?
        .solve(&b);
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok((intercept, coef.iter().copied().collect()))
}

fn weighted_r2(e: &Explanation, p: &Perturbations, target: &[f64]) -> f64 {
    if target.iter().all(|&y| y == target[0]) {
        // a flat target is reproduced exactly by the intercept
        return 1.0;
    }
    let sw: f64 = p.weights.iter().sum();
    let mean = target.iter().zip(&p.weights).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (r, (&y, &w)) in target.iter().zip(&p.weights).enumerate() {
        ss_res += w * (y - e.surrogate(p.binary.row(r))).powi(2);
        ss_tot += w * (y - mean).powi(2);
    }
    1.0 - ss_res / ss_tot
}

/// Weighted R² of the surrogate against fresh model scores on `p`.
pub fn fidelity_score<M: Classifier + Sync + ?Sized>(
    explanation: &Explanation,
    model: &M,
    p: &Perturbations,
) -> Result<f64> {
    if p.data.n_cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: p.data.n_cols(),
        });
    }
    let k = explanation.explained_class as usize;
    let target: Vec<f64> = (0..p.data.n_rows())
        .into_par_iter()
        .map(|r| model.proba_row(p.data.row(r))[k])
        .collect();
    Ok(weighted_r2(explanation, p, &target))
}
