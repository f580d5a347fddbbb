//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modelimp::data::ValidationPolicy;
use modelimp::{Algorithm, EnsembleSpec, NaAction, WeightScheme};

#[derive(Debug, Parser)]
#[command(name = "modelimp", version, about = "Measure how much each model contributes to an ensemble forecast")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-task importance scores from forecasts and observations.
    Score(ScoreArgs),
    /// Summarize per-task importance scores into one value per group.
    Aggregate(AggregateArgs),
    /// Report counts, per-model ranges and the best model of each task.
    Summary(SummaryArgs),
    /// Time the algorithms on synthetic data and count ensemble evaluations.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Ensemble method: simple_mean, simple_median or linear_pool.
    #[arg(long, default_value = "simple_mean")]
    pub ensemble: EnsembleSpec,

    /// Inverse-CDF evaluations per component for linear_pool on quantiles.
    #[arg(long)]
    pub grid_size: Option<usize>,

    /// lomo or lasomo.
    #[arg(long, default_value = "lomo")]
    pub algorithm: Algorithm,

    /// Subset weighting for lasomo: equal or perm_based.
    #[arg(long, default_value = "equal")]
    pub subset_wt: WeightScheme,

    /// Worker threads used across tasks.
    #[arg(long, env = "MODELIMP_WORKERS", default_value_t = 1)]
    pub workers: usize,

    /// Refuse lasomo on tasks with more models than this.
    #[arg(long, default_value_t = modelimp::importance::DEFAULT_MAX_LASOMO_MODELS)]
    pub max_lasomo_models: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Forecast table (CSV, long format).
    #[arg(long)]
    pub forecasts: PathBuf,

    /// Observed values (CSV).
    #[arg(long)]
    pub oracle: PathBuf,

    #[command(flatten)]
    pub importance: ImportanceArgs,

    /// Floor applied to log scores of pmf forecasts.
    #[arg(long, default_value_t = modelimp::scoring::DEFAULT_MIN_LOG_SCORE, allow_negative_numbers = true)]
    pub min_log_score: f64,

    /// What to do with tasks that fail validation: error or skip.
    #[arg(long, default_value = "error")]
    pub validation: ValidationPolicy,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,

    /// Write here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Do not print the run header.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Importance table written by `score` (CSV or JSON); `-` reads standard input.
    #[arg(long)]
    pub scores: PathBuf,

    /// Grouping columns.
    #[arg(long, value_delimiter = ',', default_value = "model_id")]
    pub by: Vec<String>,

    #[arg(long, default_value = "drop")]
    pub na_action: NaAction,

    /// mean, median or quantile.
    #[arg(long, default_value = "mean")]
    pub fun: String,

    /// Argument for the summary function as key=value, e.g. probs=0.25.
    #[arg(long, value_parser = parse_key_value)]
    pub fun_arg: Vec<(String, String)>,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    /// Importance table written by `score` (CSV or JSON); `-` reads standard input.
    #[arg(long)]
    pub scores: PathBuf,

    /// Task winners shown in the text preview.
    #[arg(long, default_value_t = modelimp::summarize::DEFAULT_PREVIEW_ROWS)]
    pub preview_rows: usize,

    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,

    /// Append the full task list, model summary and task winners to the text report.
    #[arg(long)]
    pub details: bool,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model counts, as a range `2..10` (inclusive) or a list `2,4,8`.
    #[arg(long, default_value = "2..10", value_parser = parse_grid)]
    pub models_grid: Grid,

    /// Task counts, as a range or a list.
    #[arg(long, default_value = "10,20,50,100", value_parser = parse_grid)]
    pub tasks_grid: Grid,

    #[command(flatten)]
    pub importance: ImportanceArgs,

    /// Seed of the synthetic data generator.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Also write elapsed times per cell to this CSV file.
    #[arg(long)]
    pub timings: Option<PathBuf>,

    /// Do not print elapsed times to standard error.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid(pub Vec<usize>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a non-negative integer"))
    };
    let values: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(values))
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}
