//! The `rtlab` command line.
//!
//! Every subcommand reads its inputs from files, writes its outputs atomically
//! into `--dir`, and embeds a [`RunManifest`] (command, config, seed, input
//! digests) in each JSON artifact. Exit codes: 0 success, 1 data/validation
//! errors, 2 configuration or usage errors.

mod artifacts;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rtlab_core::learners::{Algorithm, InputMode};
use rtlab_core::pipeline::{SbsMetric, SearchMethod};

pub use artifacts::{InputDigest, RunManifest};

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::validation(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rtlab_core::Error> for CliError {
    fn from(e: rtlab_core::Error) -> Self {
        CliError { code: if e.is_validation() { 1 } else { 2 }, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rtlab", version, about = "Response-time analytics for scale administrations")]
struct Cli {
    /// Directory for outputs; relative input paths resolve against it too.
    #[arg(long, global = true, default_value = ".")]
    dir: PathBuf,
    /// Master seed for every random choice.
    #[arg(long, global = true, env = "RT_LAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct DataArgs {
    /// Cohort file (JSONL or CSV).
    #[arg(long, default_value = "cohort.jsonl")]
    pub input: String,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct ScreenArgs {
    /// Longest admissible single response time, seconds.
    #[arg(long, default_value_t = 60.0)]
    pub max_rt: f64,
    /// Mean response time below which a participant is careless, seconds.
    #[arg(long, default_value_t = 1.5)]
    pub min_mean_rt: f64,
    /// Response-time variance above which a participant is careless, s^2.
    #[arg(long, default_value_t = 6.0)]
    pub max_variance: f64,
    /// Total score at or above which the label is 1.
    #[arg(long, default_value_t = 7)]
    pub threshold: i64,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct ModelArgs {
    #[arg(long)]
    pub model: Algorithm,
    #[arg(long, default_value = "feature")]
    pub mode: InputMode,
    /// JSON model configuration; defaults to the tuned settings for model and mode.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize a raw export into cohort.jsonl.
    Ingest(IngestArgs),
    /// Apply the exclusion rules.
    Screen(ScreenCmd),
    /// Group comparisons and per-item regressions.
    Analyze(AnalyzeArgs),
    /// Per-participant feature matrix.
    Features(FeaturesArgs),
    /// PCA or t-SNE embedding of the response-time matrix.
    Embed(EmbedArgs),
    /// Fit one model on the whole screened cohort.
    Train(TrainArgs),
    /// Repeated balanced downsampling with stratified cross-validation.
    Evaluate(EvaluateArgs),
    /// Sequential backward feature selection.
    Select(SelectArgs),
    /// Hyperparameter search.
    Tune(TuneArgs),
    /// Shapley-value attributions for a trained model.
    Explain(ExplainArgs),
    /// Generate a synthetic cohort with a ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Plot-ready JSON and CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct IngestArgs {
    /// Raw export; relative paths resolve against the working directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct ScreenCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum TestKind {
    Mwu,
    Ttest,
    Anova,
    Pearson,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum GroupBy {
    /// Insomnia label (0 vs 1).
    Label,
    /// Score of the item named by `--value` (rt1..rt7).
    ItemScore,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[arg(long, value_enum)]
    pub test: TestKind,
    #[arg(long, value_enum, default_value = "label")]
    pub group_by: GroupBy,
    /// total_rt, total_score or rt1..rt7.
    #[arg(long, default_value = "total_rt")]
    pub value: String,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct FeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    /// Leave out PCA and t-SNE coordinates.
    #[arg(long)]
    pub no_embeddings: bool,
    /// Keep correlated columns.
    #[arg(long)]
    pub no_prune: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum EmbedMethod {
    Pca,
    Tsne,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct EmbedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[arg(long, value_enum, default_value = "pca")]
    pub method: EmbedMethod,
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Permute labels first (null control).
    #[arg(long)]
    pub shuffle_labels: bool,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub cap: usize,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value = "r2", value_parser = parse_sbs_metric)]
    pub metric: SbsMetric,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value = "tpe", value_parser = parse_search_method)]
    pub method: SearchMethod,
    /// Folds of the per-trial cross-validation on one balanced resample.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    /// Model artifact written by `train`.
    #[arg(long)]
    pub model_file: String,
    /// Explain at most this many leading rows.
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 50)]
    pub background: usize,
    /// Coalition evaluations per row for kernel SHAP.
    #[arg(long, default_value_t = 2048)]
    pub budget: usize,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.08)]
    pub prevalence: f64,
    /// No injected artifacts and no group shift.
    #[arg(long)]
    pub clean: bool,
    /// Also screen the cohort and compare against the planted truth.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub screening: ScreenArgs,
    /// Metrics reports written by `evaluate`, for ROC and confusion sections.
    #[arg(long = "metrics")]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = rtlab_core::report::DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
}

fn parse_sbs_metric(s: &str) -> Result<SbsMetric, String> {
    match s {
        "r2" => Ok(SbsMetric::R2),
        "accuracy" => Ok(SbsMetric::Accuracy),
        other => Err(format!("unknown metric {other:?} (r2, accuracy)")),
    }
}

fn parse_search_method(s: &str) -> Result<SearchMethod, String> {
    match s {
        "tpe" => Ok(SearchMethod::Tpe),
        "random" => Ok(SearchMethod::Random),
        other => Err(format!("unknown search method {other:?} (tpe, random)")),
    }
}

pub(crate) struct Globals {
    pub dir: PathBuf,
    pub seed: u64,
}

/// Parse `argv` (program name first), run the command, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let globals = Globals { dir: cli.dir, seed: cli.seed };
    let result = match cli.threads {
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&globals, cli.command)),
            Err(e) => Err(CliError::config(e.to_string())),
        },
        None => dispatch(&globals, cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rtlab: {e}");
            e.code
        }
    }
}

fn dispatch(g: &Globals, command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => commands::ingest(g, &a),
        Command::Screen(a) => commands::screen(g, &a),
        Command::Analyze(a) => commands::analyze(g, &a),
        Command::Features(a) => commands::features(g, &a),
        Command::Embed(a) => commands::embed(g, &a),
        Command::Train(a) => commands::train(g, &a),
        Command::Evaluate(a) => commands::evaluate(g, &a),
        Command::Select(a) => commands::select(g, &a),
        Command::Tune(a) => commands::tune(g, &a),
        Command::Explain(a) => commands::explain(g, &a),
        Command::Simulate(a) => commands::simulate(g, &a),
        Command::Report(a) => commands::report(g, &a),
    }
}
