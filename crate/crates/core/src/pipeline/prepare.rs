use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Result, StageContext};
use crate::learners::{ModelKind, ModelSpec};
use crate::preprocess::FittedPreprocessor;
use crate::resample::{resample, ResampleMode};
use crate::selection::{fit_pca, rfecv, PcaModel, RfecvOptions};
use crate::tabular::{
    generate_synthetic, lifewell_fixture, parse_csv, shuffle_split, CsvOptions, Dataset, Schema, SynthSpec,
};

use super::audit::AuditLog;
use super::config::{DataSource, PipelineConfig, SelectionConfig, SelectionMode};

/// Read or generate the configured raw dataset.
pub fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv {
            path,
            schema,
            missing_markers,
        } => {
            let schema = match schema {
                Some(p) => Schema::load(p)?,
                None => crate::lifewell::schema(),
            };
            let mut opts = CsvOptions::default();
            if let Some(m) = missing_markers {
                opts.missing_markers = m.clone();
            }
            parse_csv(path, &schema, &opts)
        }
        DataSource::Planted {
            n_rows,
            n_informative,
            n_noise,
            class_imbalance_ratio,
            missing_fraction,
            seed,
        } => generate_synthetic(&SynthSpec {
            n_rows: *n_rows,
            n_informative: *n_informative,
            n_noise: *n_noise,
            class_imbalance_ratio: *class_imbalance_ratio,
            missing_fraction: *missing_fraction,
            seed: *seed,
        }),
        DataSource::Lifewell {
            n_rows,
            minority_fraction,
            missing_fraction,
            seed,
        } => lifewell_fixture(*n_rows, *minority_fraction, *missing_fraction, *seed),
    }
}

/// Feature selection learned on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FittedSelection {
    None,
    Rfecv {
        selected: Vec<String>,
        ranking: Vec<(String, usize)>,
        curve: Vec<(usize, f64)>,
    },
    Pca(PcaModel),
}

impl FittedSelection {
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        match self {
            FittedSelection::None => Ok(ds.clone()),
            FittedSelection::Rfecv { selected, .. } => ds.select_codes(selected),
            FittedSelection::Pca(p) => p.apply(ds),
        }
    }

    /// Map one row over `input_codes` into model inputs.
    pub fn transform_row(&self, input_codes: &[String], row: &[f64]) -> Vec<f64> {
        match self {
            FittedSelection::None => row.to_vec(),
            FittedSelection::Rfecv { selected, .. } => selected
                .iter()
                .map(|c| row[input_codes.iter().position(|x| x == c).expect("selected code is an input")])
                .collect(),
            FittedSelection::Pca(p) => p.transform_row(row),
        }
    }

    /// Preprocessed columns a caller has to provide.
    pub fn required_codes(&self, preprocessed: &[String]) -> Vec<String> {
        match self {
            FittedSelection::Rfecv { selected, .. } => selected.clone(),
            _ => preprocessed.to_vec(),
        }
    }
}

pub fn fit_selection(train: &Dataset, cfg: &SelectionConfig) -> Result<FittedSelection> {
    if let Some(target) = cfg.mode.pca_target() {
        return Ok(FittedSelection::Pca(fit_pca(train, target)?));
    }
    match cfg.mode {
        SelectionMode::Rfecv => {
            let opts = RfecvOptions {
                estimator: ModelSpec::new(ModelKind::RandomForest).with("n_estimators", json!(cfg.n_estimators)),
                k_folds: cfg.k_folds,
                step: cfg.step,
                seed: cfg.seed,
                metric: cfg.metric,
            };
            let r = rfecv(train, &opts)?;
            Ok(FittedSelection::Rfecv {
                selected: r.selected_codes,
                ranking: r.ranking,
                curve: r.curve,
            })
        }
        _ => Ok(FittedSelection::None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub input_features: usize,
    /// Column count after preprocessing, before selection.
    pub preprocessed_features: usize,
    pub selected_features: usize,
    /// (Discontent, Content) before and after resampling.
    pub train_counts: (usize, usize),
    pub resampled_counts: (usize, usize),
    pub test_counts: (usize, usize),
}

/// Everything the model fits share: one split, preprocessed, resampled
/// and reduced.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub schema: Schema,
    pub preprocessor: FittedPreprocessor,
    pub selection: FittedSelection,
    /// Resampled, selected training rows: what the models see.
    pub train: Dataset,
    /// Selected training rows without resampling.
    pub train_real: Dataset,
    pub test: Dataset,
    pub audit: AuditLog,
    pub diagnostics: Diagnostics,
}

pub fn prepare(cfg: &PipelineConfig, mode: ResampleMode, selection: SelectionMode) -> Result<Prepared> {
    let raw = load_data(&cfg.data.source).stage("load")?;
    prepare_dataset(&raw, cfg, mode, selection)
}

pub fn prepare_dataset(
    raw: &Dataset,
    cfg: &PipelineConfig,
    mode: ResampleMode,
    selection: SelectionMode,
) -> Result<Prepared> {
    let split = shuffle_split(raw, cfg.data.train_fraction, cfg.data.seed).stage("split")?;
    let mut audit = AuditLog::new(&split.test);

    audit.record("preprocess", &split.train)?;
    let (preprocessor, train) = FittedPreprocessor::fit(&split.train, &cfg.preprocess).stage("preprocess")?;
    let test = preprocessor.apply(&split.test).stage("preprocess")?;
    info!("{} features after preprocessing", train.n_features());

    audit.record("resample", &train)?;
    let resampled = resample(&train, mode, &cfg.resample.plan).stage("resample")?;

    let sel_cfg = SelectionConfig { mode: selection, ..cfg.selection };
    audit.record("select", &resampled)?;
    let fitted = fit_selection(&resampled, &sel_cfg).stage("select")?;
    let model_train = fitted.apply(&resampled).stage("select")?;
    let train_real = fitted.apply(&train).stage("select")?;
    let test = fitted.apply(&test).stage("select")?;
    audit.record("fit", &model_train)?;

    let diagnostics = Diagnostics {
        n_rows: raw.n_rows(),
        n_train: split.train.n_rows(),
        n_test: split.test.n_rows(),
        input_features: raw.n_features(),
        preprocessed_features: train.n_features(),
        selected_features: model_train.n_features(),
        train_counts: train.class_counts()?,
        resampled_counts: resampled.class_counts()?,
        test_counts: test.class_counts()?,
    };
    Ok(Prepared {
        schema: raw.schema(),
        preprocessor,
        selection: fitted,
        train: model_train,
        train_real,
        test,
        audit,
        diagnostics,
    })
}
