//! Feature ranking: forest impurity importances, recursive elimination
//! with cross-validation, and PCA variance-threshold reduction.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::learners::{fit_model, ClassifierModel, ModelKind, ModelSpec};
use crate::matrix::Matrix;
use crate::metrics::Metric;
use crate::tabular::{ColumnMeta, Dataset};
use crate::tuning::{complement, stratified_kfold};

/// Per-feature share of the total Gini decrease, averaged over trees.
pub fn impurity_importances(model: &ClassifierModel) -> Result<Vec<f64>> {
    let imp = model
        .feature_importances()
        .ok_or_else(|| Error::invalid("importances need a tree-based model"))?;
    let s: f64 = imp.iter().sum();
    if s > 0.0 {
        Ok(imp)
    } else {
        // No split anywhere: nothing to tell the features apart.
        Ok(vec![1.0 / imp.len() as f64; imp.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvOptions {
    pub estimator: ModelSpec,
    pub k_folds: usize,
    pub step: usize,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for RfecvOptions {
    fn default() -> Self {
        RfecvOptions {
            estimator: ModelSpec::new(ModelKind::RandomForest).with("n_estimators", json!(100)),
            k_folds: 5,
            step: 1,
            seed: 42,
            metric: Metric::Accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    pub selected_codes: Vec<String>,
    /// 1 for selected features; larger values were eliminated earlier.
    pub ranking: Vec<(String, usize)>,
    /// (feature count, mean CV score), largest count first.
    pub curve: Vec<(usize, f64)>,
    pub folds: usize,
}

fn cv_score(x: &Matrix, y: &[u8], folds: &[Vec<usize>], opts: &RfecvOptions) -> Result<f64> {
    let scores = folds
        .par_iter()
        .map(|test| {
            let train = complement(y.len(), test);
            let xt = x.select_rows(&train);
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let m = fit_model(&opts.estimator, &xt, &yt, None, opts.seed)?;
            let proba = m.predict_proba(&x.select_rows(test))?;
            let yv: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            opts.metric.score(&yv, &proba)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn rfecv(ds: &Dataset, opts: &RfecvOptions) -> Result<RfecvResult> {
    let p = ds.n_features();
    if p < 2 {
        return Err(Error::invalid("RFECV needs at least two features"));
    }
    if opts.step == 0 {
        return Err(Error::invalid("step must be at least 1"));
    }
    if ds.missing_count() > 0 {
        return Err(Error::data("RFECV needs a dataset without missing cells"));
    }
    let y = ds.require_labels()?;
    let folds = stratified_kfold(y, opts.k_folds, opts.seed)?;
    let codes = ds.feature_codes();
    let mut current: Vec<usize> = (0..p).collect();
    // elimination round per feature; survivors keep usize::MAX
    let mut dropped_at = vec![usize::MAX; p];
    let mut curve = Vec::new();
    let mut survivors = Vec::new();
    let mut round = 0;
    loop {
        let x = ds.values().select_cols(&current);
        let score = cv_score(&x, y, &folds, opts)?;
        curve.push((current.len(), score));
        survivors.push(current.clone());
        if current.len() == 1 {
            break;
        }
        let m = fit_model(&opts.estimator, &x, y, None, opts.seed)?;
        let imp = impurity_importances(&m)?;
        let n_drop = opts.step.min(current.len() - 1);
        let mut order: Vec<usize> = (0..current.len()).collect();
        // least important first; among equals the later column goes first
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)));
        let drop: Vec<usize> = order[..n_drop].iter().map(|&j| current[j]).collect();
        for &f in &drop {
            dropped_at[f] = round;
        }
        current.retain(|f| !drop.contains(f));
        round += 1;
    }
    // best score; ties favour fewer features (later in the curve)
    let mut best = 0;
    for (i, &(_, s)) in curve.iter().enumerate() {
        if s >= curve[best].1 {
            best = i;
        }
    }
    let selected = &survivors[best];
    let mut ranking: Vec<(String, usize)> = Vec::with_capacity(p);
    for f in 0..p {
        // dropped in round r leaves survivors[r + 1]; the last round before
        // the selected set ranks 2
        let rank = if selected.contains(&f) { 1 } else { 1 + best - dropped_at[f] };
        ranking.push((codes[f].clone(), rank));
    }
    Ok(RfecvResult {
        selected_codes: selected.iter().map(|&f| codes[f].clone()).collect(),
        ranking,
        curve,
        folds: opts.k_folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Row-major, one retained component per row.
    pub components: Vec<Vec<f64>>,
    /// Explained-variance ratio of every component, descending.
    pub explained_ratio: Vec<f64>,
    pub k: usize,
    pub input_codes: Vec<String>,
}

impl PcaModel {
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(0, self.k);
        for row in x.rows() {
            out.push_row(&self.transform_row(row));
        }
        out
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, zi) in self.components.iter().zip(z) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += zi * cj;
            }
        }
        x
    }

    pub fn output_codes(&self) -> Vec<String> {
        (1..=self.k).map(|i| format!("PC{i}")).collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let codes = ds.feature_codes();
        if codes != self.input_codes {
            return Err(Error::DimensionMismatch {
                expected: self.input_codes.len(),
                actual: codes.len(),
            });
        }
        let feats = self
            .output_codes()
            .into_iter()
            .map(|c| ColumnMeta::numeric(c, "principal component"))
            .collect();
        ds.with_features(feats, self.transform(ds.values()))
    }
}

/// Fit a PCA keeping the fewest components whose cumulative explained
/// variance reaches `target`.
pub fn fit_pca(ds: &Dataset, target: f64) -> Result<PcaModel> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::invalid("variance target must lie in (0, 1]"));
    }
    if ds.missing_count() > 0 {
        return Err(Error::data("PCA needs a dataset without missing cells"));
    }
    let (n, p) = (ds.n_rows(), ds.n_features());
    if n < 2 {
        return Err(Error::data("PCA needs at least two rows"));
    }
    let x = ds.values();
    let mean: Vec<f64> = (0..p).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let centred = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - mean[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 1e-12 {
        return Err(Error::Degenerate("every feature is constant".into()));
    }
    let explained_ratio: Vec<f64> = values.iter().map(|v| v / total).collect();
    let mut k = p;
    let mut cum = 0.0;
    for (i, r) in explained_ratio.iter().enumerate() {
        cum += r;
        if cum >= target - 1e-9 {
            k = i + 1;
            break;
        }
    }
    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // sign: largest-magnitude entry positive
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_ratio,
        k,
        input_codes: ds.feature_codes(),
    })
}

pub fn pca_reduce(ds: &Dataset, target: f64) -> Result<(PcaModel, Dataset)> {
    let model = fit_pca(ds, target)?;
    let out = model.apply(ds)?;
    Ok((model, out))
}
