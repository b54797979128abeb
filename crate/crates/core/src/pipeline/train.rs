use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::explain::fit_discretizer;
use crate::learners::{fit_model, ClassifierModel, ModelKind, ModelSpec};
use crate::metrics::{
    error_breakdown, evaluate, format_summary, mean_std_report, paired_ttest, write_summary_csv, ErrorRow,
    EvaluationReport, ReportRow, SummaryRow,
};
use crate::tuning::{grid_search, random_search, CvOptions, ParamSpace, SearchResult};

use super::artifact::{save_artifact, ModelArtifact, NamedModel, ARTIFACT_VERSION};
use super::audit::AuditLog;
use super::config::PipelineConfig;
use super::prepare::{prepare, Diagnostics, Prepared};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: String,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub models: Vec<ModelRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub a: String,
    pub b: String,
    /// p-values in `ReportRow::COLUMNS` order; `None` when undefined.
    pub p: [Option<f64>; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub model: String,
    pub search: SearchResult,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub config_fingerprint: String,
    pub diagnostics: Diagnostics,
    pub audit: AuditLog,
    pub tuning: Option<TuningOutcome>,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
    pub ttests: Vec<TTestRow>,
    /// FP/FN per model for the artifact's seed.
    pub errors: Vec<ErrorRow>,
    pub artifact: ModelArtifact,
}

/// One fitted model per (seed, roster entry), test-set scored.
pub struct FittedRun {
    pub seed: u64,
    pub name: String,
    pub kind: ModelKind,
    pub model: ClassifierModel,
    pub report: EvaluationReport,
    pub predictions: Vec<u8>,
}

/// Fit and score every roster entry for every seed. The outer vector
/// follows the roster, the inner one the seeds.
pub fn fit_roster(
    prepared: &Prepared,
    roster: &[(String, ModelSpec)],
    seeds: &[u64],
) -> Vec<(String, Result<Vec<FittedRun>>)> {
    let x = prepared.train.values();
    let jobs: Vec<(usize, u64)> = (0..roster.len())
        .flat_map(|m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: Vec<Result<FittedRun>> = jobs
        .par_iter()
        .map(|&(m, seed)| {
            let (name, spec) = &roster[m];
            let y = prepared.train.require_labels()?;
            let model = fit_model(spec, x, y, None, seed)?;
            let proba = model.predict_proba(prepared.test.values())?;
            let report = evaluate(prepared.test.require_labels()?, &proba)?;
            let predictions = proba.into_iter().map(crate::learners::label_of).collect();
            Ok(FittedRun {
                seed,
                name: name.clone(),
                kind: spec.kind,
                model,
                report,
                predictions,
            })
        })
        .collect();
    let mut it = results.into_iter();
    roster
        .iter()
        .map(|(name, _)| {
            let runs: Result<Vec<FittedRun>> = it.by_ref().take(seeds.len()).collect();
            (name.clone(), runs.map_err(|e| Error::data(format!("{name}: {e}"))))
        })
        .collect()
}

fn tune(cfg: &PipelineConfig, prepared: &Prepared, roster: &mut [(String, ModelSpec)]) -> Result<Option<TuningOutcome>> {
    let Some(t) = &cfg.tuning else {
        return Ok(None);
    };
    let kind = ModelKind::from_str(&t.model)?;
    let (name, spec) = roster
        .iter_mut()
        .find(|(_, s)| s.kind == kind)
        .ok_or_else(|| Error::Config(format!("tuned model {} is not in the roster", t.model)))?;
    let space = t.space.clone().unwrap_or_else(ParamSpace::xgboost_default);
    let opts = CvOptions {
        k: t.k_folds,
        metric: t.metric,
        seed: t.seed,
        stratified: true,
    };
    let search = if t.grid {
        grid_search(&space, spec, &prepared.train, &opts)?
    } else {
        random_search(&space, t.n_iter, t.seed, spec, &prepared.train, &opts)?
    };
    info!("tuned {name}: best CV score {:.4}", search.best_score);
    *spec = search.best_spec(spec);
    Ok(Some(TuningOutcome {
        model: name.clone(),
        search,
    }))
}

fn ttests(cfg: &PipelineConfig, per_model: &[(String, Vec<ReportRow>)]) -> Vec<TTestRow> {
    let rows = |name: &str| per_model.iter().find(|(n, _)| n == name).map(|(_, r)| r);
    cfg.report
        .ttests
        .iter()
        .filter_map(|[a, b]| {
            let (ra, rb) = (rows(a)?, rows(b)?);
            let p = std::array::from_fn(|j| {
                let va: Vec<f64> = ra.iter().map(|r| r.values()[j]).collect();
                let vb: Vec<f64> = rb.iter().map(|r| r.values()[j]).collect();
                paired_ttest(&va, &vb).ok().map(|t| t.p)
            });
            Some(TTestRow {
                a: a.clone(),
                b: b.clone(),
                p,
            })
        })
        .collect()
}

/// Split, preprocess, resample, select, optionally tune, then fit and
/// score the roster under every seed.
pub fn run_training(cfg: &PipelineConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg, cfg.resample.mode, cfg.selection.mode)?;
    train_prepared(cfg, prepared)
}

pub fn train_prepared(cfg: &PipelineConfig, prepared: Prepared) -> Result<TrainingOutcome> {
    let mut roster = cfg.roster()?;
    let tuning = tune(cfg, &prepared, &mut roster).stage("tune")?;
    let seeds = cfg.seeds();
    let served = cfg.served_model()?;

    let mut fitted: Vec<(String, Vec<FittedRun>)> = Vec::new();
    for (name, runs) in fit_roster(&prepared, &roster, &seeds) {
        fitted.push((name, runs.stage("fit")?));
    }

    let runs: Vec<SeedRun> = seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| SeedRun {
            seed,
            models: fitted
                .iter()
                .map(|(name, r)| ModelRun {
                    model: name.clone(),
                    report: r[i].report.clone(),
                })
                .collect(),
        })
        .collect();
    let per_model: Vec<(String, Vec<ReportRow>)> = fitted
        .iter()
        .map(|(name, r)| (name.clone(), r.iter().map(|f| f.report.row()).collect()))
        .collect();
    let summary = mean_std_report(&per_model)?;
    let ttests = ttests(cfg, &per_model);

    // the artifact comes from the seed where the served model scores best
    let served_runs = &fitted.iter().find(|(n, _)| *n == served).expect("served model in roster").1;
    let best = (0..seeds.len()).fold(0, |best, i| {
        if served_runs[i].report.macro_avg.f1 > served_runs[best].report.macro_avg.f1 {
            i
        } else {
            best
        }
    });
    let y_test = prepared.test.require_labels()?;
    let preds: Vec<(String, Vec<u8>)> = fitted
        .iter()
        .map(|(n, r)| (n.clone(), r[best].predictions.clone()))
        .collect();
    let errors = error_breakdown(&preds, y_test)?;

    let discretizer = fit_discretizer(&prepared.train_real).stage("explain")?;
    let artifact = ModelArtifact {
        format_version: ARTIFACT_VERSION,
        schema: prepared.schema.clone(),
        preprocessor: prepared.preprocessor.clone(),
        selection: prepared.selection.clone(),
        feature_codes: prepared.train.feature_codes(),
        discretizer,
        models: fitted
            .into_iter()
            .map(|(name, mut r)| {
                let f = r.swap_remove(best);
                NamedModel {
                    name,
                    kind: f.kind,
                    model: f.model,
                }
            })
            .collect(),
        primary: served,
        seed: seeds[best],
        config_fingerprint: cfg.fingerprint(),
    };
    if !prepared.audit.is_clean() {
        return Err(Error::data("leakage audit failed"));
    }
    Ok(TrainingOutcome {
        config_fingerprint: cfg.fingerprint(),
        diagnostics: prepared.diagnostics,
        audit: prepared.audit,
        tuning,
        runs,
        summary,
        ttests,
        errors,
        artifact,
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w).map_err(|e| Error::Csv(e.to_string()))?;
    w.into_inner().map_err(|e| Error::Csv(e.to_string()))
}

pub const ARTIFACT_FILE: &str = "artifact.lwa";

/// Write report files and the artifact under `dir`. Returns the artifact
/// fingerprint.
pub fn write_training_outputs(outcome: &TrainingOutcome, dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut summary = Vec::new();
    write_summary_csv(&outcome.summary, &mut summary)?;
    write(&dir.join("report.csv"), summary)?;
    write(&dir.join("report.txt"), format_summary(&outcome.summary))?;
    write(&dir.join("runs.json"), serde_json::to_vec_pretty(&outcome.runs)?)?;
    write(&dir.join("audit.json"), serde_json::to_vec_pretty(&outcome.audit)?)?;
    write(&dir.join("diagnostics.json"), serde_json::to_vec_pretty(&outcome.diagnostics)?)?;
    write(
        &dir.join("errors.csv"),
        csv_bytes(|w| {
            w.write_record(["Model", "False positives", "False negatives"])?;
            for e in &outcome.errors {
                w.write_record([e.model.clone(), e.false_positives.to_string(), e.false_negatives.to_string()])?;
            }
            Ok(())
        })?,
    )?;
    write(
        &dir.join("ttests.csv"),
        csv_bytes(|w| {
            let mut header = vec!["Model Comparison".to_string()];
            header.extend(ReportRow::COLUMNS.iter().map(|c| c.to_string()));
            w.write_record(&header)?;
            for t in &outcome.ttests {
                let mut rec = vec![format!("{} vs. {}", t.a, t.b)];
                rec.extend(t.p.iter().map(|p| match p {
                    Some(p) => format!("{p:.3}"),
                    None => "n/a".to_string(),
                }));
                w.write_record(&rec)?;
            }
            Ok(())
        })?,
    )?;
    if let Some(t) = &outcome.tuning {
        write(&dir.join("tuning.json"), serde_json::to_vec_pretty(t)?)?;
    }
    if outcome.ttests.iter().any(|t| t.p.iter().any(Option::is_none)) {
        warn!("some paired t-tests are undefined (identical scores across seeds)");
    }
    save_artifact(&outcome.artifact, dir.join(ARTIFACT_FILE))
}
