use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use lifewell_core::matrix::Matrix;
use lifewell_core::pipeline::*;
use lifewell_core::rng;
use lifewell_core::tabular::{ColumnMeta, Dataset, Schema};
use lifewell_core::Error;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const FIXTURE: &str = r#"
seeds = [21, 42]

[data]
train_fraction = 0.75
seed = 5

[data.source]
kind = "planted"
n_rows = 2000
n_informative = 3
n_noise = 5
class_imbalance_ratio = 0.3
seed = 11

[selection]
mode = "rfecv"
k_folds = 3
n_estimators = 20

[models]
roster = ["rf", "gb", "lgb", "ensemble"]

[models.overrides.random_forest]
n_estimators = 30

[models.overrides.gradient_boosting]
n_estimators = 60

[models.overrides.lgb]
n_estimators = 60
"#;

fn fixture() -> PipelineConfig {
    PipelineConfig::from_toml_str(FIXTURE).unwrap()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_config_gives_identical_reports() {
    let cfg = fixture();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = write_training_outputs(&run_training(&cfg).unwrap(), a.path()).unwrap();
    let fb = write_training_outputs(&run_training(&cfg).unwrap(), b.path()).unwrap();
    assert_eq!(fa, fb);
    let (ra, rb) = (read_dir(a.path()), read_dir(b.path()));
    assert!(ra.iter().any(|(n, _)| n == "report.csv"));
    assert!(ra.iter().any(|(n, _)| n == ARTIFACT_FILE));
    assert_eq!(ra, rb);
}

#[test]
fn test_rows_never_reach_fitting() {
    let cfg = fixture();
    let p = prepare(&cfg, cfg.resample.mode, cfg.selection.mode).unwrap();
    let test: BTreeSet<u64> = p.test.row_ids().iter().copied().collect();
    for ds in [&p.train, &p.train_real] {
        assert!(ds.row_ids().iter().all(|id| !test.contains(id)));
    }
    assert!(p.audit.is_clean());
    let stages: Vec<&str> = p.audit.entries.iter().map(|e| e.stage.as_str()).collect();
    assert_eq!(stages, ["preprocess", "resample", "select", "fit"]);
    // dual resampling balances the classes with synthetic minority rows
    let fit = p.audit.entries.last().unwrap();
    assert!(fit.n_synthetic > 0);
    assert_eq!(p.diagnostics.resampled_counts.0, p.diagnostics.resampled_counts.1);
}

#[test]
fn report_has_ensemble_row_and_learns_the_planted_rule() {
    let out = run_training(&fixture()).unwrap();
    let names: Vec<&str> = out.summary.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["Random Forest", "Gradient Boosting", "LGB", "Ensemble"]);
    let ens = &out.summary[3];
    assert_eq!(ens.runs, 2);
    assert!(ens.metrics[0].mean >= 0.85, "ensemble accuracy {}", ens.metrics[0].mean);
    assert_eq!(out.artifact.primary, "Ensemble");
    assert_eq!(out.errors.len(), 4);
    // RF vs GB and LGB vs Ensemble; the XGBoost pair is skipped
    assert_eq!(out.ttests.len(), 2);
}

#[test]
fn single_seed_has_zero_std() {
    let mut cfg = fixture();
    cfg.n_seeds = Some(1);
    let out = run_training(&cfg).unwrap();
    for row in &out.summary {
        assert!(row.metrics.iter().all(|m| m.std == 0.0));
    }
    assert!(out.ttests.iter().all(|t| t.p.iter().all(Option::is_none)));
}

fn trained_artifact() -> ModelArtifact {
    let mut cfg = fixture();
    cfg.n_seeds = Some(1);
    run_training(&cfg).unwrap().artifact
}

#[test]
fn artifact_round_trip_preserves_predictions() {
    let a = trained_artifact();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.lwa");
    let fp = save_artifact(&a, &path).unwrap();
    let loaded = load_artifact(&path).unwrap();
    assert_eq!(loaded.fingerprint, fp);
    assert_eq!(loaded.artifact, a);

    let mut r = rng::seeded(3);
    let d = a.feature_codes.len();
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect())
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    for m in &a.models {
        let before = m.model.predict_proba(&x).unwrap();
        let after = loaded.artifact.model(&m.name).unwrap().predict_proba(&x).unwrap();
        assert_eq!(before, after);
    }
}

#[test]
fn fingerprint_matches_sha256sum() {
    let a = trained_artifact();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.lwa");
    let fp = save_artifact(&a, &path).unwrap();
    let out = Command::new("sha256sum").arg(&path).output().expect("sha256sum available");
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.split_whitespace().next().unwrap(), fp);
}

#[test]
fn damaged_artifacts_are_rejected() {
    let bytes = trained_artifact().to_bytes().unwrap();
    let truncated = &bytes[..bytes.len() - 10];
    assert!(matches!(ModelArtifact::from_bytes(truncated), Err(Error::Corrupted(_))));

    let mut flipped = bytes.clone();
    let last = flipped.len() - 3;
    flipped[last] ^= 1;
    assert!(matches!(ModelArtifact::from_bytes(&flipped), Err(Error::Corrupted(_))));

    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header = String::from_utf8(bytes[..nl].to_vec()).unwrap().replacen(" v1 ", " v0 ", 1);
    let mut old = header.into_bytes();
    old.extend_from_slice(&bytes[nl..]);
    let err = ModelArtifact::from_bytes(&old).unwrap_err();
    assert!(matches!(err, Error::VersionMismatch { found: 0, expected: 1 }));
    let msg = err.to_string();
    assert!(msg.contains("v0") && msg.contains("v1"), "{msg}");
}

#[test]
fn answers_are_validated_against_the_schema() {
    let a = trained_artifact();
    let codes = a.answer_codes();
    let mut answers: std::collections::BTreeMap<String, f64> = codes.iter().map(|c| (c.clone(), 1.0)).collect();
    let row = a.validate_answers(&answers).unwrap();
    assert_eq!(row.len(), codes.len());
    let p = a.predict_row(&a.model_row(&row)).unwrap();
    assert!((p.class_probs[0] + p.class_probs[1] - 1.0).abs() < 1e-9);

    let missing = codes[0].clone();
    answers.remove(&missing);
    answers.insert("nope".into(), 1.0);
    let issues = a.validate_answers(&answers).unwrap_err();
    assert!(issues.iter().any(|i| i.code == missing && i.problem == AnswerProblem::Missing));
    assert!(issues.iter().any(|i| i.code == "nope" && i.problem == AnswerProblem::Unknown));
}

#[test]
fn ablation_tables_have_the_reported_layout() {
    let mut cfg = fixture();
    cfg.n_seeds = Some(1);
    let report = ablation_run(&cfg).unwrap();
    assert_eq!(
        report.resampling.columns,
        ["Without Resampling", "Oversampling Only", "Undersampling Only", "Over & under sampling"]
    );
    assert_eq!(report.selection.columns, ["Without RFECV", "PCA (95%)", "PCA (90%)", "With RFECV"]);
    assert_eq!(report.resampling.rows.len(), 4);

    // the "none" resampling column equals a plain run with resampling off
    let mut plain = cfg.clone();
    plain.resample.mode = lifewell_core::resample::ResampleMode::None;
    let out = run_training(&plain).unwrap();
    for (row, summary) in report.resampling.rows.iter().zip(&out.summary) {
        assert_eq!(row.cells[0].accuracy.unwrap(), summary.metrics[0]);
        assert_eq!(row.cells[0].f1.unwrap(), summary.metrics[1]);
    }
    // and the RFECV column equals the main run
    let main = run_training(&cfg).unwrap();
    for (row, summary) in report.selection.rows.iter().zip(&main.summary) {
        assert_eq!(row.cells[3].accuracy.unwrap(), summary.metrics[0]);
    }
    let csv = String::from_utf8(report.selection.to_csv().unwrap()).unwrap();
    assert!(csv.starts_with("Model,Without RFECV Acc (%),Without RFECV F1 (%)"));
}

#[test]
fn failing_cells_do_not_abort_the_grid() {
    let mut cfg = fixture();
    cfg.n_seeds = Some(1);
    cfg.models.roster = vec![RosterEntry::Name("rf".into()), RosterEntry::Name("gb".into())];
    cfg.models
        .overrides
        .insert("random_forest".into(), [("n_estimators".to_string(), serde_json::json!(0))].into());
    let report = ablation_run(&cfg).unwrap();
    for table in [&report.resampling, &report.selection] {
        assert!(table.rows[0].cells.iter().all(|c| c.error.is_some() && c.accuracy.is_none()));
        assert!(table.rows[1].cells.iter().all(|c| c.error.is_none() && c.accuracy.is_some()));
    }
    let csv = String::from_utf8(report.resampling.to_csv().unwrap()).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("Random Forest,error,error"));
}

#[test]
fn missing_input_is_a_load_stage_error() {
    let cfg = PipelineConfig::new(DataSource::Csv {
        path: "/nonexistent/shild.csv".into(),
        schema: None,
        missing_markers: None,
    });
    match run_training(&cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "load"),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

fn bracket_dataset(n: usize, seed: u64) -> Dataset {
    let mut cols = vec![ColumnMeta::numeric("age", "")];
    cols.extend((0..6).map(|j| ColumnMeta::numeric(format!("x{j}"), "")));
    cols.push(ColumnMeta::label("y", ""));
    let schema = Schema::new(cols, "y").unwrap();
    let mut r = rng::seeded(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let age = r.random_range(16..=64) as f64;
        let x: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut r)).collect();
        // x0 decides the youngest bracket, x1 everyone else
        let signal = if age <= 21.0 { x[0] } else { x[1] };
        labels.push(u8::from(signal > 0.0));
        let mut row = vec![age];
        row.extend(x);
        rows.push(row);
    }
    Dataset::from_rows(&schema, &rows, Some(labels)).unwrap()
}

fn cohort_cfg() -> PipelineConfig {
    let mut cfg = fixture();
    cfg.resample.mode = lifewell_core::resample::ResampleMode::None;
    cfg.selection.mode = SelectionMode::None;
    cfg.selection.n_estimators = 60;
    cfg
}

#[test]
fn cohort_finds_bracket_specific_signal() {
    let ds = bracket_dataset(2400, 8);
    let spec = CohortSpec {
        top_k: 1,
        ..CohortSpec::default()
    };
    let report = cohort_analysis(&ds, &spec, &cohort_cfg()).unwrap();
    let top: Vec<&str> = report.brackets.iter().map(|b| b.top[0].code.as_str()).collect();
    assert_eq!(top, ["x0", "x1", "x1", "x1"]);
    assert_eq!(report.brackets.iter().map(|b| b.n_rows).sum::<usize>(), 2400);
}

#[test]
fn cohort_importances_are_normalised() {
    let ds = bracket_dataset(1200, 9);
    let report = cohort_analysis(&ds, &CohortSpec::default(), &cohort_cfg()).unwrap();
    for b in &report.brackets {
        assert_eq!(b.top.len(), 5);
        let s: f64 = b.top.iter().map(|f| f.importance).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(b.top.iter().all(|f| f.code != "age"));
    }
}

#[test]
fn default_brackets_tile_the_age_range() {
    let spec = CohortSpec::default();
    spec.validate().unwrap();
    let names: Vec<&str> = spec.brackets.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, ["16-21", "22-34", "35-44", "45-64"]);
    for age in 16..=64 {
        assert_eq!(spec.brackets.iter().filter(|b| b.contains(age as f64)).count(), 1);
    }
    let gap = CohortSpec {
        brackets: vec![Bracket::new(16, 21), Bracket::new(23, 64)],
        ..CohortSpec::default()
    };
    assert!(gap.validate().is_err());
}

#[test]
fn empty_bracket_is_an_error() {
    let ds = bracket_dataset(400, 10);
    let young: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.value(r, 0) > 21.0).collect();
    let ds = ds.select_rows(&young);
    let err = cohort_analysis(&ds, &CohortSpec::default(), &cohort_cfg()).unwrap_err();
    assert!(err.to_string().contains("16-21"), "{err}");
}
