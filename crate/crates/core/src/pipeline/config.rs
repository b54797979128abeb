use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learners::{ModelKind, ModelSpec};
use crate::metrics::Metric;
use crate::preprocess::PreprocessOptions;
use crate::resample::{ResampleMode, ResamplePlan};
use crate::tabular::SynthSpec;
use crate::tuning::ParamSpace;

use super::cohort::CohortSpec;

/// Default repetition seeds.
pub const DEFAULT_SEEDS: [u64; 5] = [21, 42, 63, 84, 105];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    None,
    Pca95,
    Pca90,
    Rfecv,
}

impl SelectionMode {
    /// Column order of the feature-reduction ablation.
    pub const ALL: [SelectionMode; 4] = [
        SelectionMode::None,
        SelectionMode::Pca95,
        SelectionMode::Pca90,
        SelectionMode::Rfecv,
    ];

    pub fn title(self) -> &'static str {
        match self {
            SelectionMode::None => "Without RFECV",
            SelectionMode::Pca95 => "PCA (95%)",
            SelectionMode::Pca90 => "PCA (90%)",
            SelectionMode::Rfecv => "With RFECV",
        }
    }

    pub fn pca_target(self) -> Option<f64> {
        match self {
            SelectionMode::Pca95 => Some(0.95),
            SelectionMode::Pca90 => Some(0.90),
            _ => None,
        }
    }
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::None => "none",
            SelectionMode::Pca95 => "pca95",
            SelectionMode::Pca90 => "pca90",
            SelectionMode::Rfecv => "rfecv",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SelectionMode::None),
            "pca95" => Ok(SelectionMode::Pca95),
            "pca90" => Ok(SelectionMode::Pca90),
            "rfecv" => Ok(SelectionMode::Rfecv),
            _ => Err(Error::invalid(format!("unknown selection mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A survey CSV. Without `schema` the bundled LifeWell schema is used.
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: Option<PathBuf>,
        #[serde(default)]
        missing_markers: Option<Vec<String>>,
    },
    /// Planted-signal synthetic data.
    Planted {
        n_rows: usize,
        n_informative: usize,
        n_noise: usize,
        #[serde(default = "one")]
        class_imbalance_ratio: f64,
        #[serde(default)]
        missing_fraction: f64,
        seed: u64,
    },
    /// Synthetic answers to the LifeWell questionnaire.
    Lifewell {
        n_rows: usize,
        #[serde(default = "lifewell_minority")]
        minority_fraction: f64,
        #[serde(default)]
        missing_fraction: f64,
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn lifewell_minority() -> f64 {
    0.14
}

impl DataSource {
    pub fn planted(spec: &SynthSpec) -> Self {
        DataSource::Planted {
            n_rows: spec.n_rows,
            n_informative: spec.n_informative,
            n_noise: spec.n_noise,
            class_imbalance_ratio: spec.class_imbalance_ratio,
            missing_fraction: spec.missing_fraction,
            seed: spec.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default = "train_fraction")]
    pub train_fraction: f64,
    /// Seed of the train/test split.
    #[serde(default = "split_seed")]
    pub seed: u64,
}

fn train_fraction() -> f64 {
    0.8
}

fn split_seed() -> u64 {
    21
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub mode: ResampleMode,
    #[serde(flatten)]
    pub plan: ResamplePlan,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            mode: ResampleMode::Dual,
            plan: ResamplePlan::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    pub k_folds: usize,
    /// Trees in the elimination estimator.
    pub n_estimators: usize,
    pub step: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            mode: SelectionMode::Rfecv,
            k_folds: 5,
            n_estimators: 100,
            step: 1,
            metric: Metric::Accuracy,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The reported best hyperparameters.
    Paper,
    /// Library defaults.
    Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RosterEntry {
    Name(String),
    Spec(ModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub roster: Vec<RosterEntry>,
    pub hyperparameters: Preset,
    /// Extra parameters by model key, applied to ensemble members too.
    pub overrides: BTreeMap<String, BTreeMap<String, Value>>,
    /// Model the artifact serves; defaults to the ensemble when present.
    pub serve: Option<String>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            roster: ModelKind::REPORTED
                .iter()
                .map(|k| RosterEntry::Name(k.key().to_string()))
                .collect(),
            hyperparameters: Preset::Paper,
            overrides: BTreeMap::new(),
            serve: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    pub model: String,
    #[serde(default = "n_iter")]
    pub n_iter: usize,
    #[serde(default = "k_folds")]
    pub k_folds: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "split_seed")]
    pub seed: u64,
    /// Full grid instead of `n_iter` random draws.
    #[serde(default)]
    pub grid: bool,
    /// Defaults to the booster ranges.
    #[serde(default)]
    pub space: Option<ParamSpace>,
}

fn n_iter() -> usize {
    20
}

fn k_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Pairs of model names compared by paired t-tests across seeds.
    pub ttests: Vec<[String; 2]>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        let pair = |a: &str, b: &str| [a.to_string(), b.to_string()];
        ReportConfig {
            ttests: vec![
                pair("Random Forest", "Gradient Boosting"),
                pair("LGB", "Ensemble"),
                pair("XGBoost", "Ensemble"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default)]
    pub resample: ResampleConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub tuning: Option<TuningConfig>,
    /// Overrides `seeds` with the first `n` multiples of 21.
    #[serde(default)]
    pub n_seeds: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub cohort: CohortSpec,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default = "output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn new(source: DataSource) -> Self {
        PipelineConfig {
            data: DataConfig {
                source,
                train_fraction: train_fraction(),
                seed: split_seed(),
            },
            preprocess: PreprocessOptions::default(),
            resample: ResampleConfig::default(),
            selection: SelectionConfig::default(),
            models: ModelsConfig::default(),
            tuning: None,
            n_seeds: None,
            seeds: default_seeds(),
            cohort: CohortSpec::default(),
            report: ReportConfig::default(),
            output_dir: output_dir(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; relative paths inside resolve against its folder.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path, schema, .. } = &mut self.data.source {
            fix(path);
            if let Some(s) = schema {
                fix(s);
            }
        }
        fix(&mut self.output_dir);
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.data.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("train_fraction {f} must lie in (0, 1)")));
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.models.roster.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        for key in self.models.overrides.keys() {
            ModelKind::from_str(key).map_err(|e| Error::Config(format!("override {key}: {e}")))?;
        }
        let roster = self.roster()?;
        if let Some(name) = &self.models.serve {
            if !roster.iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("served model {name} is not in the roster")));
            }
        }
        if let Some(t) = &self.tuning {
            let kind = ModelKind::from_str(&t.model).map_err(|e| Error::Config(e.to_string()))?;
            if !roster.iter().any(|(_, s)| s.kind == kind) {
                return Err(Error::Config(format!("tuned model {} is not in the roster", t.model)));
            }
        }
        if self.selection.k_folds < 2 || self.selection.step == 0 || self.selection.n_estimators == 0 {
            return Err(Error::Config("selection needs k_folds ≥ 2, step ≥ 1 and n_estimators ≥ 1".into()));
        }
        self.cohort.validate()?;
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self.n_seeds {
            Some(n) => (1..=n as u64).map(|i| 21 * i).collect(),
            None => self.seeds.clone(),
        }
    }

    /// (display name, spec) per roster entry, overrides applied.
    pub fn roster(&self) -> Result<Vec<(String, ModelSpec)>> {
        let mut out: Vec<(String, ModelSpec)> = Vec::new();
        for entry in &self.models.roster {
            let mut spec = match entry {
                RosterEntry::Name(n) => {
                    let kind = ModelKind::from_str(n).map_err(|e| Error::Config(e.to_string()))?;
                    match self.models.hyperparameters {
                        Preset::Paper => ModelSpec::paper(kind),
                        Preset::Defaults if kind == ModelKind::Ensemble => {
                            let mut s = ModelSpec::paper(kind);
                            s.members.iter_mut().for_each(|m| m.params.clear());
                            s
                        }
                        Preset::Defaults => ModelSpec::new(kind),
                    }
                }
                RosterEntry::Spec(s) => s.clone(),
            };
            apply_overrides(&mut spec, &self.models.overrides);
            let name = spec.kind.display_name().to_string();
            if out.iter().any(|(n, _)| *n == name) {
                return Err(Error::Config(format!("{name} appears twice in the roster")));
            }
            out.push((name, spec));
        }
        Ok(out)
    }

    /// The model the artifact serves.
    pub fn served_model(&self) -> Result<String> {
        if let Some(s) = &self.models.serve {
            return Ok(s.clone());
        }
        let roster = self.roster()?;
        Ok(roster
            .iter()
            .find(|(_, s)| s.kind == ModelKind::Ensemble)
            .unwrap_or(&roster[0])
            .0
            .clone())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn apply_overrides(spec: &mut ModelSpec, overrides: &BTreeMap<String, BTreeMap<String, Value>>) {
    for (key, params) in overrides {
        if ModelKind::from_str(key).ok() == Some(spec.kind) {
            spec.params.extend(params.clone());
        }
    }
    spec.members
        .iter_mut()
        .for_each(|m| apply_overrides(m, overrides));
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [data.source]
        kind = "planted"
        n_rows = 300
        n_informative = 3
        n_noise = 4
        seed = 1
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.seeds(), vec![21, 42, 63, 84, 105]);
        assert_eq!(c.resample.mode, ResampleMode::Dual);
        assert_eq!(c.resample.plan.smote_target_ratio, 0.40);
        assert_eq!(c.selection.mode, SelectionMode::Rfecv);
        assert_eq!(c.roster().unwrap().len(), 10);
        assert_eq!(c.served_model().unwrap(), "Ensemble");
    }

    #[test]
    fn toml_round_trip() {
        let c = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        let back = PipelineConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.fingerprint(), back.fingerprint());
    }

    #[test]
    fn overrides_reach_ensemble_members() {
        let text = format!(
            "{MINIMAL}\n[models]\nroster = [\"rf\", \"ensemble\"]\n[models.overrides.random_forest]\nn_estimators = 7\n"
        );
        let c = PipelineConfig::from_toml_str(&text).unwrap();
        let roster = c.roster().unwrap();
        assert_eq!(roster[0].1.params["n_estimators"], 7);
        assert_eq!(roster[1].1.members[0].params["n_estimators"], 7);
        assert_eq!(roster[1].1.members[0].params["max_features"], "log2");
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_mode = format!("{MINIMAL}\n[selection]\nmode = \"lasso\"\n");
        assert!(matches!(PipelineConfig::from_toml_str(&bad_mode), Err(Error::Config(_))));
        let unknown = format!("bogus = 1\n{MINIMAL}");
        assert!(PipelineConfig::from_toml_str(&unknown).is_err());
        let dup = format!("seeds = [1, 1]\n{MINIMAL}");
        assert!(PipelineConfig::from_toml_str(&dup).is_err());
        let serve = format!("{MINIMAL}\n[models]\nroster = [\"rf\"]\nserve = \"Ensemble\"\n");
        assert!(PipelineConfig::from_toml_str(&serve).is_err());
    }

    #[test]
    fn n_seeds_takes_multiples_of_21() {
        let c = PipelineConfig::from_toml_str(&format!("n_seeds = 2\n{MINIMAL}")).unwrap();
        assert_eq!(c.seeds(), vec![21, 42]);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(
            &p,
            "output_dir = \"res\"\n[data.source]\nkind = \"csv\"\npath = \"d.csv\"\n",
        )
        .unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.output_dir, dir.path().join("res"));
        match c.data.source {
            DataSource::Csv { path, .. } => assert_eq!(path, dir.path().join("d.csv")),
            _ => unreachable!(),
        }
    }
}
