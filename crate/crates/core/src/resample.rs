//! Class balancing: SMOTE oversampling of the minority class followed by
//! random undersampling of the majority.

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::tabular::{Dataset, SYNTHETIC_ROW_BIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResamplePlan {
    /// Oversample the minority up to this fraction of the majority.
    pub smote_target_ratio: f64,
    pub smote_k: usize,
    pub seed: u64,
    /// Round synthetic values to integers (off by default).
    #[serde(default)]
    pub round_synthetic: bool,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan {
            smote_target_ratio: 0.40,
            smote_k: 5,
            seed: 21,
            round_synthetic: false,
        }
    }
}

impl ResamplePlan {
    fn validate(&self) -> Result<()> {
        if !(self.smote_target_ratio > 0.0 && self.smote_target_ratio <= 1.0) {
            return Err(Error::invalid("smote_target_ratio must lie in (0, 1]"));
        }
        if self.smote_k == 0 {
            return Err(Error::invalid("smote_k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    None,
    OverOnly,
    UnderOnly,
    Dual,
}

impl ResampleMode {
    pub const ALL: [ResampleMode; 4] = [
        ResampleMode::None,
        ResampleMode::OverOnly,
        ResampleMode::UnderOnly,
        ResampleMode::Dual,
    ];

    pub fn title(self) -> &'static str {
        match self {
            ResampleMode::None => "Without Resampling",
            ResampleMode::OverOnly => "Oversampling Only",
            ResampleMode::UnderOnly => "Undersampling Only",
            ResampleMode::Dual => "Over & under sampling",
        }
    }
}

/// (minority label, majority label, minority rows, majority rows)
fn classes(ds: &Dataset) -> Result<(u8, u8, Vec<usize>, Vec<usize>)> {
    let labels = ds.require_labels()?;
    let zeros: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let ones: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    if zeros.is_empty() || ones.is_empty() {
        return Err(Error::data("resampling needs both classes present"));
    }
    if ones.len() < zeros.len() {
        Ok((1, 0, ones, zeros))
    } else {
        Ok((0, 1, zeros, ones))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k nearest minority neighbours (by Euclidean distance, ties by position)
/// of each minority row, excluding the row itself.
fn neighbours(points: &Matrix, k: usize) -> Vec<Vec<usize>> {
    let m = points.n_rows();
    (0..m)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(points.row(i), points.row(j)), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Grow the minority class with interpolated rows until it reaches
/// `ceil(ratio · majority)`. Majority rows are untouched.
pub fn smote_oversample(ds: &Dataset, plan: &ResamplePlan) -> Result<Dataset> {
    plan.validate()?;
    if ds.missing_count() > 0 {
        return Err(Error::data("SMOTE needs a dataset without missing cells"));
    }
    let (min_label, _, min_rows, maj_rows) = classes(ds)?;
    if min_rows.len() < 2 {
        return Err(Error::data("SMOTE needs at least 2 minority rows"));
    }
    let target = (plan.smote_target_ratio * maj_rows.len() as f64).ceil() as usize;
    if min_rows.len() >= target {
        return Ok(ds.clone());
    }
    let mut k = plan.smote_k;
    if min_rows.len() <= k {
        k = min_rows.len() - 1;
        warn!("only {} minority rows; SMOTE k reduced to {k}", min_rows.len());
    }
    let points = ds.values().select_rows(&min_rows);
    let nn = neighbours(&points, k);
    let mut rng = rng::seeded(plan.seed);
    let n_new = target - min_rows.len();
    let mut synth = Matrix::zeros(0, ds.n_features());
    let mut row = vec![0.0; ds.n_features()];
    for _ in 0..n_new {
        let i = rng.random_range(0..points.n_rows());
        let j = nn[i][rng.random_range(0..k)];
        let u: f64 = rng.random();
        for (c, v) in row.iter_mut().enumerate() {
            let a = points.get(i, c);
            let b = points.get(j, c);
            let x = a + u * (b - a);
            *v = if plan.round_synthetic { x.round() } else { x };
        }
        synth.push_row(&row);
    }
    let ids: Vec<u64> = (0..n_new as u64).map(|i| SYNTHETIC_ROW_BIT | i).collect();
    ds.append_rows(&synth, &vec![min_label; n_new], &ids)
}

/// Subsample the majority class without replacement down to the minority
/// count. Retained rows keep their original order.
pub fn random_undersample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let (_, _, min_rows, maj_rows) = classes(ds)?;
    if min_rows.len() == maj_rows.len() {
        return Ok(ds.clone());
    }
    let mut rng = rng::seeded(seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, maj_rows.len(), min_rows.len())
        .into_iter()
        .map(|i| maj_rows[i])
        .chain(min_rows.iter().copied())
        .collect();
    keep.sort_unstable();
    Ok(ds.select_rows(&keep))
}

/// SMOTE to the target ratio, then undersample to equal class counts.
pub fn dual_resample(ds: &Dataset, plan: &ResamplePlan) -> Result<Dataset> {
    let over = smote_oversample(ds, plan)?;
    random_undersample(&over, plan.seed.wrapping_add(1))
}

/// Dispatch on an ablation mode.
pub fn resample(ds: &Dataset, mode: ResampleMode, plan: &ResamplePlan) -> Result<Dataset> {
    match mode {
        ResampleMode::None => Ok(ds.clone()),
        ResampleMode::OverOnly => smote_oversample(ds, plan),
        ResampleMode::UnderOnly => random_undersample(ds, plan.seed.wrapping_add(1)),
        ResampleMode::Dual => dual_resample(ds, plan),
    }
}
