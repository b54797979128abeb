//! Fit-on-train / apply-anywhere preprocessing: high-null column dropping,
//! ordinal encoding, iterative imputation, zero-variance removal and
//! two-sigma outlier replacement.

pub mod encode;
mod impute;
mod outlier;
mod ridge;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{missing_profile, Dataset};

pub use encode::{fit_ordinal_encoder, OrdinalEncoder};
pub use impute::{iterative_impute, ImputeMode, ImputeOptions, IterativeImputer};
pub use outlier::{clamp_outliers, fit_outlier_stats, ColumnStats, OutlierStats};
pub use ridge::{fit_bayesian_ridge, fit_bayesian_ridge_with, BayesianRidgeOptions, RidgeFit};

/// Drop columns whose missing fraction is strictly above `threshold`.
pub fn drop_high_null(train: &Dataset, threshold: f64) -> Result<(Dataset, Vec<String>)> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("null threshold {threshold} outside [0, 1]")));
    }
    let dropped: Vec<String> = missing_profile(train)
        .into_iter()
        .filter(|(_, f)| *f > threshold)
        .map(|(c, _)| c)
        .collect();
    if train.n_features() > 0 && dropped.len() == train.n_features() {
        return Err(Error::data(format!(
            "every feature column has more than {:.0}% missing values",
            threshold * 100.0
        )));
    }
    Ok((train.drop_codes(&dropped), dropped))
}

/// Drop columns whose observed training values are all equal.
pub fn drop_zero_variance(train: &Dataset) -> (Dataset, Vec<String>) {
    let dropped: Vec<String> = (0..train.n_features())
        .filter(|&c| {
            let obs = train.observed(c);
            obs.windows(2).all(|w| w[0] == w[1])
        })
        .map(|c| train.features()[c].code.clone())
        .collect();
    (train.drop_codes(&dropped), dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub null_threshold: f64,
    pub impute: ImputeOptions,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            null_threshold: 0.20,
            impute: ImputeOptions::default(),
        }
    }
}

/// Frozen preprocessing parameters learned from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub input_codes: Vec<String>,
    pub dropped_high_null: Vec<String>,
    pub encoder: OrdinalEncoder,
    pub imputer: IterativeImputer,
    pub dropped_zero_variance: Vec<String>,
    pub outlier_stats: OutlierStats,
    pub output_codes: Vec<String>,
}

impl FittedPreprocessor {
    /// Fit every stage on `train` and return the transformed training data.
    pub fn fit(train: &Dataset, opts: &PreprocessOptions) -> Result<(Self, Dataset)> {
        let input_codes = train.feature_codes();
        let encoder = fit_ordinal_encoder(&train.schema());
        let (ds, dropped_high_null) = drop_high_null(train, opts.null_threshold)?;
        let (ds, imputer) = iterative_impute(&ds, &opts.impute)?;
        let (ds, dropped_zero_variance) = drop_zero_variance(&ds);
        if ds.n_features() == 0 {
            return Err(Error::data("no feature columns left after preprocessing"));
        }
        let outlier_stats = fit_outlier_stats(&ds);
        let ds = clamp_outliers(&ds, &outlier_stats);
        info!(
            "preprocessing kept {} of {} columns ({} high-null, {} zero-variance dropped)",
            ds.n_features(),
            input_codes.len(),
            dropped_high_null.len(),
            dropped_zero_variance.len()
        );
        let fitted = FittedPreprocessor {
            input_codes,
            dropped_high_null,
            encoder,
            imputer,
            dropped_zero_variance,
            outlier_stats,
            output_codes: ds.feature_codes(),
        };
        Ok((fitted, ds))
    }

    /// Replay the chain with training statistics only.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut ds = ds.drop_codes(&self.dropped_high_null);
        if ds.missing_count() > 0 {
            ds = self.imputer.transform(&ds)?;
        }
        let ds = ds.drop_codes(&self.dropped_zero_variance);
        let ds = clamp_outliers(&ds, &self.outlier_stats);
        ds.select_codes(&self.output_codes)
    }

    /// Outlier replacement for one complete answer vector over `codes`.
    pub fn clamp_answers(&self, codes: &[String], values: &mut [f64]) {
        for (code, v) in codes.iter().zip(values.iter_mut()) {
            if let Some(s) = self.outlier_stats.get(code) {
                *v = s.clamp(*v);
            }
        }
    }
}
