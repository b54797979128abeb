use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lifewell_core::explain::ExplainOptions;
use lifewell_core::metrics::{evaluate, format_summary, mean_std_report};
use lifewell_core::pipeline::{
    ablation_run, cohort_analysis, load_artifact, load_data, run_training, write_ablation_outputs,
    write_training_outputs, PipelineConfig, ARTIFACT_FILE,
};
use lifewell_core::tabular::{
    class_name, generate_synthetic, lifewell_fixture, parse_csv, shuffle_split, write_csv, CsvOptions, Dataset,
    Schema, SynthSpec, CONTENT, DISCONTENT,
};
use lifewell_core::textgen::{export_text, validate_mapping, MappingTable};
use lifewell_service::{ServiceConfig, DEFAULT_BIND, DEFAULT_MAX_CONCURRENCY};
use log::info;

#[derive(Parser)]
#[command(name = "lifewell", version, about = "Life-satisfaction prediction pipeline")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write reports plus an artifact.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Overrides the config's seed count.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Score every model in an artifact on labelled data.
    Evaluate {
        #[arg(short, long)]
        artifact: PathBuf,
        /// Use the held-out split of this config's data.
        #[arg(short, long, conflicts_with = "data", required_unless_present = "data")]
        config: Option<PathBuf>,
        /// Use every row of this CSV.
        #[arg(short, long)]
        data: Option<PathBuf>,
        /// Schema for --data; defaults to the LifeWell questionnaire.
        #[arg(long, requires = "data")]
        schema: Option<PathBuf>,
        /// Write the per-model reports as JSON here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Predict and explain one questionnaire response.
    Explain {
        #[arg(short, long)]
        artifact: PathBuf,
        /// JSON object of code -> encoded answer, inline or as a file path.
        #[arg(short, long)]
        row: String,
        /// Print every rule instead of the top ten.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Resampling and selection ablation grids.
    Ablate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Top features per age bracket.
    Cohort {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Render each row as a sentence, one per line.
    Textgen {
        #[arg(short, long, conflicts_with = "data", required_unless_present = "data")]
        config: Option<PathBuf>,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        schema: Option<PathBuf>,
        /// Answer-to-phrase table; defaults to the LifeWell mapping.
        #[arg(short, long)]
        mapping: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Serve the questionnaire and predictions over HTTP.
    Serve {
        #[arg(short, long, env = "LIFEWELL_ARTIFACT")]
        artifact: Option<PathBuf>,
        #[arg(short, long, env = "LIFEWELL_BIND", default_value = DEFAULT_BIND)]
        bind: SocketAddr,
        #[arg(long, env = "LIFEWELL_MAX_CONCURRENCY", default_value_t = DEFAULT_MAX_CONCURRENCY)]
        max_concurrency: usize,
    },
    /// Write a synthetic dataset as CSV.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Planted)]
        kind: SynthKind,
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        informative: usize,
        #[arg(long, default_value_t = 7)]
        noise: usize,
        /// Planted: minority/majority ratio. LifeWell: minority fraction.
        #[arg(long)]
        imbalance: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        missing: f64,
        #[arg(long, default_value_t = 21)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the dataset's schema as TOML.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Planted,
    Lifewell,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Train { config, out, seeds } => train(&config, out, seeds),
        Command::Evaluate {
            artifact,
            config,
            data,
            schema,
            out,
        } => evaluate_cmd(&artifact, config.as_deref(), data.as_deref(), schema.as_deref(), out.as_deref()),
        Command::Explain {
            artifact,
            row,
            full,
            samples,
            seed,
            json,
        } => {
            let opts = ExplainOptions {
                n_samples: samples,
                seed,
                ..ExplainOptions::default()
            };
            explain(&artifact, &row, full, &opts, json)
        }
        Command::Ablate { config, out } => ablate(&config, out),
        Command::Cohort { config, out, top_k } => cohort(&config, out, top_k),
        Command::Textgen {
            config,
            data,
            schema,
            mapping,
            out,
        } => textgen(config.as_deref(), data.as_deref(), schema.as_deref(), mapping.as_deref(), &out),
        Command::Serve {
            artifact,
            bind,
            max_concurrency,
        } => serve(ServiceConfig {
            artifact,
            bind,
            max_concurrency,
        }),
        Command::Synth {
            kind,
            rows,
            informative,
            noise,
            imbalance,
            missing,
            seed,
            out,
            schema_out,
        } => {
            let ds = match kind {
                SynthKind::Planted => generate_synthetic(&SynthSpec {
                    class_imbalance_ratio: imbalance.unwrap_or(1.0),
                    missing_fraction: missing,
                    ..SynthSpec::new(rows, informative, noise, seed)
                })?,
                SynthKind::Lifewell => lifewell_fixture(rows, imbalance.unwrap_or(0.14), missing, seed)?,
            };
            write_csv(&ds, &out)?;
            if let Some(p) = schema_out {
                ds.schema().save(&p)?;
            }
            println!("wrote {} rows to {}", ds.n_rows(), out.display());
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn train(path: &Path, out: Option<PathBuf>, seeds: Option<usize>) -> Result<()> {
    let mut cfg = load_config(path)?;
    if seeds.is_some() {
        cfg.n_seeds = seeds;
        cfg.seeds.clear();
    }
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let outcome = run_training(&cfg)?;
    let fp = write_training_outputs(&outcome, &dir)?;
    let d = &outcome.diagnostics;
    println!(
        "{} rows ({} train / {} test); {} features after preprocessing, {} used",
        d.n_rows, d.n_train, d.n_test, d.preprocessed_features, d.selected_features
    );
    print!("{}", format_summary(&outcome.summary));
    println!("artifact {} sha256={fp}", dir.join(ARTIFACT_FILE).display());
    Ok(())
}

fn evaluate_cmd(
    artifact: &Path,
    config: Option<&Path>,
    data: Option<&Path>,
    schema: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let a = load_artifact(artifact)?.artifact;
    let raw: Dataset = match (config, data) {
        (Some(c), _) => {
            let cfg = load_config(c)?;
            let ds = load_data(&cfg.data.source)?;
            shuffle_split(&ds, cfg.data.train_fraction, cfg.data.seed)?.test
        }
        (None, Some(d)) => {
            let schema = match schema {
                Some(s) => Schema::load(s)?,
                None => lifewell_core::lifewell::schema(),
            };
            parse_csv(d, &schema, &CsvOptions::default())?
        }
        (None, None) => bail!("give --config or --data"),
    };
    let ds = a.transform(&raw)?;
    let y = ds.require_labels()?;
    let mut reports = BTreeMap::new();
    let mut rows = Vec::new();
    for m in &a.models {
        let report = evaluate(y, &m.model.predict_proba(ds.values())?)?;
        rows.push((m.name.clone(), vec![report.row()]));
        reports.insert(m.name.clone(), report);
    }
    println!("{} rows", ds.n_rows());
    print!("{}", format_summary(&mean_std_report(&rows)?));
    if let Some(p) = out {
        fs::write(p, serde_json::to_vec_pretty(&reports)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn read_answers(row: &str) -> Result<BTreeMap<String, f64>> {
    let text = if row.trim_start().starts_with('{') {
        row.to_string()
    } else {
        fs::read_to_string(row).with_context(|| format!("reading {row}"))?
    };
    serde_json::from_str(&text).context("--row must be a JSON object of code -> number")
}

fn explain(artifact: &Path, row: &str, full: bool, opts: &ExplainOptions, json: bool) -> Result<()> {
    let a = load_artifact(artifact)?.artifact;
    let answers = read_answers(row)?;
    let values = a.validate_answers(&answers).map_err(|issues| {
        let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
        anyhow!("invalid answers:\n{}", lines.join("\n"))
    })?;
    let x = a.model_row(&values);
    let p = a.predict_row(&x)?;
    let e = a.explain_row(&x, opts)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&e)?);
        return Ok(());
    }
    println!("prediction: {} (model {})", class_name(p.label), a.primary);
    println!("  P(Content)    = {:.4}", p.class_probs[CONTENT as usize]);
    println!("  P(Discontent) = {:.4}", p.class_probs[DISCONTENT as usize]);
    println!(
        "weights toward {} (intercept {:.4}, local fit R2 {:.3}):",
        class_name(e.explained_class),
        e.intercept,
        e.fidelity
    );
    let n = if full { e.contributions.len() } else { 10 };
    for c in e.top(n) {
        println!("  {:+.4}  {}", c.weight, c.rule);
    }
    Ok(())
}

fn ablate(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(path)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let report = ablation_run(&cfg)?;
    write_ablation_outputs(&report, &dir)?;
    for t in [&report.resampling, &report.selection] {
        println!("{}", t.title);
        print!("{}", String::from_utf8(t.to_csv()?)?);
    }
    info!("ablation tables written to {}", dir.display());
    Ok(())
}

fn cohort(path: &Path, out: Option<PathBuf>, top_k: Option<usize>) -> Result<()> {
    let cfg = load_config(path)?;
    let mut spec = cfg.cohort.clone();
    if let Some(k) = top_k {
        spec.top_k = k;
    }
    let raw = load_data(&cfg.data.source)?;
    let report = cohort_analysis(&raw, &spec, &cfg)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    let p = dir.join("cohort.json");
    fs::write(&p, serde_json::to_vec_pretty(&report)?)?;
    for b in &report.brackets {
        let top: Vec<String> = b.top.iter().map(|f| format!("{} {:.3}", f.code, f.importance)).collect();
        println!("{:>6} ({} rows): {}", b.bracket.name, b.n_rows, top.join(", "));
    }
    println!("radar data written to {}", p.display());
    Ok(())
}

fn textgen(
    config: Option<&Path>,
    data: Option<&Path>,
    schema: Option<&Path>,
    mapping: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let ds = match (config, data) {
        (Some(c), _) => load_data(&load_config(c)?.data.source)?,
        (None, Some(d)) => {
            let schema = match schema {
                Some(s) => Schema::load(s)?,
                None => lifewell_core::lifewell::schema(),
            };
            parse_csv(d, &schema, &CsvOptions::default())?
        }
        (None, None) => bail!("give --config or --data"),
    };
    let table = match mapping {
        Some(m) => MappingTable::load(m)?,
        None => lifewell_core::lifewell::mapping(),
    };
    let issues = validate_mapping(&table, &ds.schema());
    if !issues.is_empty() {
        let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
        bail!("mapping does not cover the data:\n{}", lines.join("\n"));
    }
    let n = export_text(&ds, &table, out)?;
    println!("wrote {n} sentences to {}", out.display());
    Ok(())
}

fn serve(config: ServiceConfig) -> Result<()> {
    if config.artifact.is_none() {
        log::warn!("no artifact given; /questionnaire and /predict will answer 503");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(lifewell_service::serve(config)).map_err(|e| anyhow!(e))
}
