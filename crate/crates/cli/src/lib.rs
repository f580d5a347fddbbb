//! Implementation of the `modelimp` command-line tool.

pub mod args;
pub mod bench;

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use modelimp::ensemble::EnsembleSpec;
use modelimp::importance::ImportanceConfig;
use modelimp::{
    aggregate, model_importance, parse_forecast_table, parse_oracle_table, summarize, ImportanceTable,
    SummaryFn,
};

pub use args::{Cli, Command};
use args::{AggregateArgs, ImportanceArgs, ReportFormat, ScoreArgs, SummaryArgs, TableFormat};

/// Exit status for bad input data or failed validation.
pub const EXIT_DATA: i32 = 1;
/// Exit status for usage and I/O errors.
pub const EXIT_IO: i32 = 2;

/// Exit status that matches the cause of `err`.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<modelimp::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_DATA };
        }
    }
    EXIT_DATA
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score(args) => cmd_score(&args),
        Command::Aggregate(args) => cmd_aggregate(&args),
        Command::Summary(args) => cmd_summary(&args),
        Command::Bench(args) => bench::cmd_bench(&args),
    }
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::new(file)))
}

/// Writes the whole output in one go once it is complete.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub(crate) fn importance_config(args: &ImportanceArgs) -> ImportanceConfig {
    let ensemble = match (args.ensemble, args.grid_size) {
        (EnsembleSpec::LinearPool { .. }, Some(grid_size)) => EnsembleSpec::LinearPool { grid_size },
        (spec, _) => spec,
    };
    ImportanceConfig {
        ensemble,
        algorithm: args.algorithm,
        subset_wt: args.subset_wt,
        workers: args.workers,
        max_lasomo_models: args.max_lasomo_models,
        ..ImportanceConfig::default()
    }
}

pub fn render_importance(table: &ImportanceTable, format: TableFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        TableFormat::Csv => table.write_csv(&mut buf)?,
        TableFormat::Json => table.write_json(&mut buf)?,
        TableFormat::Text => write!(buf, "{table}")?,
    }
    Ok(buf)
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let forecasts = parse_forecast_table(open(&args.forecasts)?)
        .with_context(|| format!("reading forecasts from {}", args.forecasts.display()))?;
    let oracle = parse_oracle_table(open(&args.oracle)?)
        .with_context(|| format!("reading oracle output from {}", args.oracle.display()))?;
    let config = ImportanceConfig {
        min_log_score: args.min_log_score,
        validation: args.validation,
        ..importance_config(&args.importance)
    };
    let run = model_importance(&forecasts, &oracle, &config)?;
    if !args.quiet {
        eprintln!("{}\n", run.header);
    }
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    emit(args.output.as_deref(), &render_importance(&run.table, args.format)?)
}

fn read_scores(path: &Path) -> Result<ImportanceTable> {
    ImportanceTable::read_any(open(path)?)
        .with_context(|| format!("reading importance scores from {}", path.display()))
}

pub fn cmd_aggregate(args: &AggregateArgs) -> Result<()> {
    let fun = SummaryFn::from_name(&args.fun, &args.fun_arg)?;
    let table = read_scores(&args.scores)?;
    let agg = aggregate(&table, &args.by, args.na_action, &fun)?;
    let mut buf = Vec::new();
    match args.format {
        TableFormat::Csv => agg.write_csv(&mut buf)?,
        TableFormat::Json => agg.write_json(&mut buf)?,
        TableFormat::Text => write!(buf, "{agg}")?,
    }
    emit(args.output.as_deref(), &buf)
}

pub fn cmd_summary(args: &SummaryArgs) -> Result<()> {
    let table = read_scores(&args.scores)?;
    let report = summarize(&table, args.preview_rows)?;
    let mut buf = Vec::new();
    match args.format {
        ReportFormat::Text => {
            write!(buf, "{report}")?;
            if args.details {
                write!(buf, "\n{}", report.details())?;
            }
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &report)?;
            writeln!(buf)?;
        }
    }
    emit(args.output.as_deref(), &buf)
}
