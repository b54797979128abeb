use serde::{Deserialize, Serialize};

use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub code: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 divisor).
    pub std: f64,
    pub median: f64,
}

impl ColumnStats {
    pub fn lower(&self) -> f64 {
        self.mean - 2.0 * self.std
    }

    pub fn upper(&self) -> f64 {
        self.mean + 2.0 * self.std
    }

    /// Replace a value outside `mean ± 2·std` (strictly) with the median.
    pub fn clamp(&self, v: f64) -> f64 {
        if self.std > 0.0 && (v < self.lower() || v > self.upper()) {
            self.median
        } else {
            v
        }
    }
}

/// Training-split statistics used to replace outliers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierStats {
    pub columns: Vec<ColumnStats>,
}

impl OutlierStats {
    pub fn get(&self, code: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.code == code)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

pub fn fit_outlier_stats(train: &Dataset) -> OutlierStats {
    let columns = (0..train.n_features())
        .map(|c| {
            let mut obs = train.observed(c);
            let n = obs.len() as f64;
            let mean = if obs.is_empty() { 0.0 } else { obs.iter().sum::<f64>() / n };
            let std = if obs.len() < 2 {
                0.0
            } else {
                (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            ColumnStats {
                code: train.features()[c].code.clone(),
                mean,
                std,
                median: median(&mut obs),
            }
        })
        .collect();
    OutlierStats { columns }
}

/// Single pass with fixed statistics. Columns without stats, masked cells
/// and zero-std columns are left alone.
pub fn clamp_outliers(ds: &Dataset, stats: &OutlierStats) -> Dataset {
    let mut values = ds.values().clone();
    for (c, meta) in ds.features().iter().enumerate() {
        let Some(s) = stats.get(&meta.code) else {
            continue;
        };
        for r in 0..ds.n_rows() {
            if !ds.is_missing(r, c) {
                values.set(r, c, s.clamp(values.get(r, c)));
            }
        }
    }
    let mut out = ds.clone();
    out.replace_values(values);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnMeta, Schema};

    fn ds(col: &[f64]) -> Dataset {
        let schema = Schema::new(
            vec![ColumnMeta::numeric("x", ""), ColumnMeta::label("y", "")],
            "y",
        )
        .unwrap();
        let rows: Vec<[f64; 1]> = col.iter().map(|&v| [v]).collect();
        Dataset::from_rows(&schema, &rows, None).unwrap()
    }

    #[test]
    fn constant_column_unchanged() {
        let d = ds(&[4.0; 6]);
        let s = fit_outlier_stats(&d);
        assert_eq!(clamp_outliers(&d, &s), d);
    }

    #[test]
    fn hand_computed_fixture() {
        // mean 1, sample variance (9·1 + 81)/9 = 10, std = 3.1623,
        // upper bound 1 + 6.3246 = 7.3246 < 10, median 0.
        let mut col = vec![0.0; 9];
        col.push(10.0);
        let d = ds(&col);
        let s = fit_outlier_stats(&d);
        let st = &s.columns[0];
        assert_eq!(st.mean, 1.0);
        assert!((st.std - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(st.median, 0.0);
        let out = clamp_outliers(&d, &s);
        assert_eq!(out.values().column(0), vec![0.0; 10]);
    }

    #[test]
    fn boundary_value_kept() {
        let st = ColumnStats {
            code: "x".into(),
            mean: 1.0,
            std: 2.0,
            median: 0.5,
        };
        assert_eq!(st.clamp(5.0), 5.0);
        assert_eq!(st.clamp(-3.0), -3.0);
        assert_eq!(st.clamp(5.000001), 0.5);
        assert_eq!(st.clamp(-3.000001), 0.5);
    }

    #[test]
    fn idempotent_with_fixed_stats() {
        let d = ds(&[0.0, 1.0, 2.0, 1.0, 0.0, 50.0, -40.0, 1.0, 2.0, 1.0]);
        let s = fit_outlier_stats(&d);
        let once = clamp_outliers(&d, &s);
        assert_eq!(clamp_outliers(&once, &s), once);
    }
}
