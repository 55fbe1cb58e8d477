//! Command-line surface: calibrate, predict, evaluate, triage, synth, split, dwa.
//!
//! Exit codes: 0 success, 2 malformed input, 3 inputs inconsistent with each
//! other (taxonomy mismatch, empty calibration stratum).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::conformal::{calibrate_independent, calibrate_risk_sensitive, Pooling, Thresholds};
use crate::dataio::{
    grouped_split, model_from_json, model_to_json, read_scores, synth_generate, to_json_padded,
    write_atomic, write_scores, ClassSynth, SplitSpec, SynthConfig, BUCKET_NAMES,
};
use crate::dwa::{replay, write_weights_csv, DwaConfig, LossHistory};
use crate::error::{Error, Result};
use crate::metrics::aggregate_safety;
use crate::report::{evaluate, predict_cohort, render_text, render_workload};
use crate::taxonomy::{parse_taxonomy, Taxonomy};
use crate::triage::{verdicts_from_csv, verdicts_to_csv, workload, CaseVerdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONSISTENCY: i32 = 3;

/// Environment variable naming a taxonomy file used when `--taxonomy` is absent.
pub const TAXONOMY_ENV: &str = "LINECP_TAXONOMY";

#[derive(Debug, Parser)]
#[command(
    name = "linecp",
    version,
    about = "Conformal prediction sets, safety metrics and triage for catheter/line classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit conformal thresholds on a labeled calibration scores file.
    Calibrate(CalibrateArgs),
    /// Build per-class prediction sets for a scores file.
    Predict(PredictArgs),
    /// Coverage, safety and triage report for a labeled scores file.
    Evaluate(EvaluateArgs),
    /// Per-image triage categories and daily workload extrapolation.
    Triage(TriageArgs),
    /// Generate a synthetic labeled cohort.
    Synth(SynthArgs),
    /// Patient-grouped train/validation/test/calibration split.
    Split(SplitArgs),
    /// Replay Dynamic Weight Averaging task weights over a loss history.
    Dwa(DwaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TaxonomyArg {
    /// Taxonomy JSON file [default: built-in 11-class catheter/line taxonomy]
    #[arg(long, env = TAXONOMY_ENV)]
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Independent,
    RiskSensitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Group,
    PerClass,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Labeled calibration scores CSV
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    #[arg(long, value_enum, default_value_t = ModeArg::RiskSensitive)]
    pub mode: ModeArg,
    /// Miscoverage rate (alpha_standard in risk-sensitive mode)
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Miscoverage rate for the Present outcome of critical classes
    #[arg(long, default_value_t = 0.01)]
    pub alpha_critical: f64,
    #[arg(long, value_enum, default_value_t = PoolingArg::Group)]
    pub pooling: PoolingArg,
    /// Model JSON to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Scores CSV; label columns are optional
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    /// Prediction-set CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled scores CSV
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    /// JSON report to write; a text table goes next to it with a .txt extension
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub daily_volume: u64,
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    /// Model JSON (with --scores)
    #[arg(long, requires = "scores", conflicts_with = "sets")]
    pub model: Option<PathBuf>,
    /// Scores CSV (with --model)
    #[arg(long, requires = "model")]
    pub scores: Option<PathBuf>,
    /// Prediction-set CSV written by `predict`, instead of --model/--scores
    #[arg(long, required_unless_present = "model")]
    pub sets: Option<PathBuf>,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    #[arg(long, default_value_t = 1000)]
    pub daily_volume: u64,
    /// Per-case verdict CSV to write
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Workload JSON to write
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synth config JSON [default: 1000 cases, prevalence 0.1, sharpness 1, temperature 1]
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config cohort size
    #[arg(long)]
    pub size: Option<usize>,
    /// Scores CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub taxonomy: TaxonomyArg,
    /// train,validation,test,calibration fractions
    #[arg(long, default_value = "0.7,0.1,0.1,0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.csv, validation.csv, test.csv, calibration.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DwaArgs {
    /// Loss history CSV: epoch,<task>...
    #[arg(long)]
    pub losses: PathBuf,
    /// Sum of the task weights (K)
    #[arg(long, default_value_t = 3.0)]
    pub k_norm: f64,
    /// Softmax temperature (T)
    #[arg(long, default_value_t = 2.0)]
    pub temperature: f64,
    /// Epochs with fixed equal weights
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Weight CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

/// Result of one command invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub human_summary: String,
    pub written: Vec<PathBuf>,
}

impl CommandOutcome {
    fn from_error(err: &Error) -> Self {
        Self {
            exit_code: if err.is_consistency() {
                EXIT_CONSISTENCY
            } else {
                EXIT_INPUT
            },
            human_summary: format!("error: {err}"),
            written: Vec::new(),
        }
    }
}

struct Output {
    summary: String,
    written: Vec<PathBuf>,
}

impl Output {
    fn new() -> Self {
        Self {
            summary: String::new(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        write_atomic(path, contents.as_bytes())?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }
}

pub fn run(cli: Cli) -> CommandOutcome {
    let mut out = Output::new();
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(&a, &mut out),
        Command::Predict(a) => cmd_predict(&a, &mut out),
        Command::Evaluate(a) => cmd_evaluate(&a, &mut out),
        Command::Triage(a) => cmd_triage(&a, &mut out),
        Command::Synth(a) => cmd_synth(&a, &mut out),
        Command::Split(a) => cmd_split(&a, &mut out),
        Command::Dwa(a) => cmd_dwa(&a, &mut out),
    };
    match result {
        Ok(()) => CommandOutcome {
            exit_code: EXIT_OK,
            human_summary: out.summary,
            written: out.written,
        },
        Err(e) => CommandOutcome::from_error(&e),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_taxonomy(arg: &TaxonomyArg) -> Result<Taxonomy> {
    match &arg.taxonomy {
        Some(path) => parse_taxonomy(&read_text(path)?),
        None => Ok(Taxonomy::default_ranzcr()),
    }
}

fn load_scores(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<crate::dataio::ScoredCase>> {
    read_scores(&read_text(path)?, taxonomy).map_err(|e| prefix(e, &path.display().to_string()))
}

fn prefix(err: Error, context: &str) -> Error {
    match err {
        Error::Input(m) => Error::Input(format!("{context}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{context}: {m}")),
        other => other,
    }
}

fn cmd_calibrate(a: &CalibrateArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let cal = load_scores(&a.scores, &taxonomy)?;
    let model = match a.mode {
        ModeArg::Independent => calibrate_independent(&cal, &taxonomy, a.alpha)?,
        ModeArg::RiskSensitive => {
            let pooling = match a.pooling {
                PoolingArg::Group => Pooling::GroupPooled,
                PoolingArg::PerClass => Pooling::PerClass,
            };
            calibrate_risk_sensitive(&cal, &taxonomy, a.alpha, a.alpha_critical, pooling)?
        }
    };
    out.write(&a.out, &model_to_json(&model)?)?;

    out.line(format!(
        "calibrated {} cases ({} mode)",
        cal.len(),
        match a.mode {
            ModeArg::Independent => "independent",
            ModeArg::RiskSensitive => "risk-sensitive",
        }
    ));
    match &model.thresholds {
        Thresholds::Independent(ts) => {
            for (id, t) in model.class_ids.iter().zip(ts) {
                out.line(format!("  {id:<26} {t}"));
            }
        }
        Thresholds::GroupPooled {
            critical_present,
            critical_absent,
            standard,
        } => {
            for (name, t) in [
                ("critical present", critical_present),
                ("critical absent", critical_absent),
                ("standard", standard),
            ] {
                if let Some(t) = t {
                    out.line(format!("  {name:<26} {t}"));
                }
            }
        }
        Thresholds::PerClass(ts) => {
            for (id, t) in model.class_ids.iter().zip(ts) {
                out.line(format!(
                    "  {id:<26} present {}  absent {}",
                    t.present, t.absent
                ));
            }
        }
    }
    out.line(format!("wrote {}", a.out.display()));
    Ok(())
}

fn load_model(path: &Path) -> Result<crate::conformal::CalibrationModel> {
    model_from_json(&read_text(path)?).map_err(|e| prefix(e, &path.display().to_string()))
}

fn cmd_predict(a: &PredictArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let model = load_model(&a.model)?;
    model.bind(&taxonomy)?;
    let cases = load_scores(&a.scores, &taxonomy)?;
    let unlabeled: Vec<_> = cases.iter().map(|c| c.without_labels()).collect();
    let verdicts = predict_cohort(&model, &unlabeled, &taxonomy)?;
    out.write(&a.out, &verdicts_to_csv(&verdicts, &taxonomy)?)?;
    out.line(format!("predicted sets for {} cases", verdicts.len()));
    out.line(format!("wrote {}", a.out.display()));
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let model = load_model(&a.model)?;
    model.bind(&taxonomy)?;
    let cases = load_scores(&a.scores, &taxonomy)?;
    if cases.is_empty() {
        return Err(Error::input("scores file has no cases"));
    }
    let (report, _) = evaluate(&model, &cases, &taxonomy, a.daily_volume)?;
    let text = render_text(&report);
    out.write(&a.report, &to_json_padded(&report)?)?;
    let txt = a.report.with_extension("txt");
    out.write(&txt, &text)?;
    out.summary.push_str(&text);
    out.line(format!(
        "wrote {} and {}",
        a.report.display(),
        txt.display()
    ));
    Ok(())
}

fn cmd_triage(a: &TriageArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let (verdicts, safety) = match (&a.model, &a.scores, &a.sets) {
        (Some(model), Some(scores), _) => {
            let model = load_model(model)?;
            model.bind(&taxonomy)?;
            let cases = load_scores(scores, &taxonomy)?;
            let verdicts = predict_cohort(&model, &cases, &taxonomy)?;
            let safety = if !cases.is_empty() && cases.iter().all(|c| c.labels().is_some()) {
                let sets: Vec<_> = verdicts.iter().map(|v| v.sets.clone()).collect();
                Some(aggregate_safety(&cases, &sets, &taxonomy)?)
            } else {
                None
            };
            (verdicts, safety)
        }
        (_, _, Some(sets)) => {
            let verdicts: Vec<CaseVerdict> = verdicts_from_csv(&read_text(sets)?, &taxonomy)
                .map_err(|e| prefix(e, &sets.display().to_string()))?;
            (verdicts, None)
        }
        _ => return Err(Error::input("triage needs --model and --scores, or --sets")),
    };
    let report = workload(&verdicts, safety.as_ref(), a.daily_volume)?;
    if let Some(path) = &a.out {
        out.write(path, &verdicts_to_csv(&verdicts, &taxonomy)?)?;
    }
    if let Some(path) = &a.report {
        out.write(path, &to_json_padded(&report)?)?;
    }
    let mut text = String::new();
    render_workload(&mut text, &report);
    out.summary.push_str(&text);
    for path in out.written.clone() {
        out.line(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let mut config = match &a.config {
        Some(path) => SynthConfig::from_json(&read_text(path)?)?,
        None => SynthConfig::new(0, 1000, ClassSynth::default()),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(size) = a.size {
        config.cohort_size = size;
    }
    let cases = synth_generate(&config, &taxonomy)?;
    out.write(&a.out, &write_scores(&cases, &taxonomy)?)?;
    out.line(format!(
        "generated {} cases (seed {})",
        cases.len(),
        config.seed
    ));
    out.line(format!("wrote {}", a.out.display()));
    Ok(())
}

fn cmd_split(a: &SplitArgs, out: &mut Output) -> Result<()> {
    let taxonomy = load_taxonomy(&a.taxonomy)?;
    let spec = SplitSpec::new(SplitSpec::parse_ratios(&a.ratios)?, a.seed)?;
    let cases = load_scores(&a.scores, &taxonomy)?;
    let buckets = grouped_split(&cases, &spec)?;
    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.display().to_string(),
        source,
    })?;
    let mut line = String::from("split sizes:");
    for (name, bucket) in BUCKET_NAMES.iter().zip(buckets.buckets()) {
        let path = a.out.join(format!("{name}.csv"));
        out.write(&path, &write_scores(bucket, &taxonomy)?)?;
        let _ = write!(line, " {name}={}", bucket.len());
    }
    out.line(line);
    out.line(format!("wrote {}", a.out.display()));
    Ok(())
}

fn cmd_dwa(a: &DwaArgs, out: &mut Output) -> Result<()> {
    let text = read_text(&a.losses)?;
    let history = LossHistory::read_csv(text.as_bytes())
        .map_err(|e| prefix(e, &a.losses.display().to_string()))?;
    let config = DwaConfig {
        num_tasks: history.num_tasks(),
        k_norm: a.k_norm,
        temperature: a.temperature,
        warmup_epochs: a.warmup,
    };
    let weights = replay(&history, &config)?;
    let mut buf = Vec::new();
    write_weights_csv(&mut buf, history.task_ids(), &weights)?;
    out.write(
        &a.out,
        &String::from_utf8(buf).expect("CSV writer emits UTF-8"),
    )?;
    out.line(format!(
        "replayed {} epochs for {} tasks",
        history.num_epochs(),
        history.num_tasks()
    ));
    out.line(format!("wrote {}", a.out.display()));
    Ok(())
}
