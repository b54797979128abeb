//! Config-driven orchestration: split, preprocess, resample, select, fit
//! the roster over several seeds, report, and persist a servable artifact.
//! Also the age-bracket and ablation studies built on the same steps.

mod ablation;
mod artifact;
mod audit;
mod cohort;
mod config;
mod prepare;
mod train;

pub use ablation::{ablation_run, write_ablation_outputs, AblationCell, AblationReport, AblationRow, AblationTable};
pub use artifact::{
    fingerprint, load_artifact, save_artifact, AnswerIssue, AnswerProblem, LoadedArtifact, ModelArtifact, NamedModel,
    Prediction, ARTIFACT_VERSION,
};
pub use audit::{AuditEntry, AuditLog};
pub use cohort::{cohort_analysis, Bracket, BracketResult, CohortReport, CohortSpec, RankedFeature};
pub use config::{
    DataConfig, DataSource, ModelsConfig, PipelineConfig, Preset, ReportConfig, ResampleConfig, RosterEntry,
    SelectionConfig, SelectionMode, TuningConfig, DEFAULT_SEEDS,
};
pub use prepare::{fit_selection, load_data, prepare, prepare_dataset, Diagnostics, FittedSelection, Prepared};
pub use train::{
    fit_roster, run_training, train_prepared, write_training_outputs, FittedRun, ModelRun, SeedRun, TTestRow,
    TrainingOutcome, TuningOutcome, ARTIFACT_FILE,
};
