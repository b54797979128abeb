use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result, StageContext};
use crate::learners::{fit_model, ModelKind, ModelSpec};
use crate::preprocess::FittedPreprocessor;
use crate::resample::resample;
use crate::selection::impurity_importances;
use crate::tabular::Dataset;

use super::config::{PipelineConfig, SelectionConfig, SelectionMode};
use super::prepare::{fit_selection, FittedSelection};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub name: String,
    pub lo: u32,
    pub hi: u32,
}

impl Bracket {
    pub fn new(lo: u32, hi: u32) -> Self {
        Bracket {
            name: format!("{lo}-{hi}"),
            lo,
            hi,
        }
    }

    pub fn contains(&self, age: f64) -> bool {
        age >= self.lo as f64 && age <= self.hi as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub age_code: String,
    pub brackets: Vec<Bracket>,
    pub top_k: usize,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            age_code: "age".into(),
            brackets: vec![
                Bracket::new(16, 21),
                Bracket::new(22, 34),
                Bracket::new(35, 44),
                Bracket::new(45, 64),
            ],
            top_k: 5,
        }
    }
}

impl CohortSpec {
    /// Brackets must tile 16..=64 in order without gaps or overlaps.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("cohort brackets: {m}")));
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        let Some(first) = self.brackets.first() else {
            return bad("none given".into());
        };
        if first.lo != 16 || self.brackets.last().map(|b| b.hi) != Some(64) {
            return bad("must cover ages 16 to 64".into());
        }
        for b in &self.brackets {
            if b.lo > b.hi {
                return bad(format!("{} is empty", b.name));
            }
        }
        for w in self.brackets.windows(2) {
            if w[1].lo != w[0].hi + 1 {
                return bad(format!("{} and {} leave a gap or overlap", w[0].name, w[1].name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub code: String,
    /// Share among the reported features; these sum to 1.
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketResult {
    pub bracket: Bracket,
    pub n_rows: usize,
    pub top: Vec<RankedFeature>,
}

/// Radar-chart data: top features per age bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub top_k: usize,
    pub brackets: Vec<BracketResult>,
}

/// Rank features inside each age bracket of the raw dataset `ds`.
///
/// Each bracket is preprocessed, resampled and (for `rfecv`) reduced on
/// its own; a forest fitted on the result supplies the importances. The
/// age column itself is left out.
pub fn cohort_analysis(ds: &Dataset, spec: &CohortSpec, cfg: &PipelineConfig) -> Result<CohortReport> {
    spec.validate()?;
    let age = ds
        .feature_index(&spec.age_code)
        .ok_or_else(|| Error::data(format!("age column {} not present", spec.age_code)))?;
    let brackets = spec
        .brackets
        .iter()
        .map(|b| {
            let rows: Vec<usize> = (0..ds.n_rows())
                .filter(|&r| !ds.is_missing(r, age) && b.contains(ds.value(r, age)))
                .collect();
            if rows.is_empty() {
                return Err(Error::data(format!("age bracket {} has no rows", b.name)));
            }
            let sub = ds.select_rows(&rows).drop_codes(&[spec.age_code.as_str()]);
            let top = rank_bracket(&sub, spec.top_k, cfg).map_err(|e| Error::data(format!("bracket {}: {e}", b.name)))?;
            Ok(BracketResult {
                bracket: b.clone(),
                n_rows: rows.len(),
                top,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("cohort")?;
    Ok(CohortReport {
        top_k: spec.top_k,
        brackets,
    })
}

fn rank_bracket(ds: &Dataset, top_k: usize, cfg: &PipelineConfig) -> Result<Vec<RankedFeature>> {
    let (_, ds) = FittedPreprocessor::fit(ds, &cfg.preprocess)?;
    let ds = resample(&ds, cfg.resample.mode, &cfg.resample.plan)?;
    let sel = SelectionConfig {
        // PCA columns are not survey items, so only elimination applies here
        mode: if cfg.selection.mode == SelectionMode::Rfecv {
            SelectionMode::Rfecv
        } else {
            SelectionMode::None
        },
        ..cfg.selection
    };
    let ds = match fit_selection(&ds, &sel)? {
        FittedSelection::Rfecv { selected, .. } => ds.select_codes(&selected)?,
        _ => ds,
    };
    let spec = ModelSpec::new(ModelKind::RandomForest).with("n_estimators", json!(cfg.selection.n_estimators));
    let model = fit_model(&spec, ds.values(), ds.require_labels()?, None, cfg.selection.seed)?;
    let imp = impurity_importances(&model)?;
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    order.truncate(top_k);
    let total: f64 = order.iter().map(|&i| imp[i]).sum();
    let n = order.len() as f64;
    let codes = ds.feature_codes();
    Ok(order
        .into_iter()
        .map(|i| RankedFeature {
            code: codes[i].clone(),
            importance: if total > 0.0 { imp[i] / total } else { 1.0 / n },
        })
        .collect())
}
