//! Runtime and evaluation-count benchmark on synthetic median forecasts.
//!
//! The table written to the output holds only deterministic values, so
//! repeated runs compare byte for byte. Wall-clock times go to standard
//! error and, on request, to a separate file.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use modelimp::data::{ForecastRow, OracleRow, REFERENCE_DATE};
use modelimp::importance::ImportanceConfig;
use modelimp::text::{render_table, Align};
use modelimp::{model_importance, Algorithm, ForecastTable, OracleTable, OutputType, TaskKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{BenchArgs, TableFormat};
use crate::{emit, importance_config};

const BENCH_DATE: &str = "2024-01-06";

/// Synthetic panel: every model forecasts every task.
pub struct Panel {
    pub forecasts: ForecastTable,
    pub oracle: OracleTable,
}

/// Median forecasts scattered around a per-task truth. Model `i` has noise
/// half-width `5 (i + 1)`, so models differ in accuracy.
pub fn synthetic_panel(n_models: usize, n_tasks: usize, seed: u64) -> Result<Panel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Arc<[String]> = vec![REFERENCE_DATE.to_string(), "location".to_string()].into();
    let mut rows = Vec::with_capacity(n_models * n_tasks);
    let mut truths = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let truth: f64 = rng.random_range(50.0..500.0);
        let location = format!("{:03}", t + 1);
        let key = TaskKey::new(Arc::clone(&columns), vec![BENCH_DATE.to_string(), location.clone()]);
        for m in 0..n_models {
            let half_width = 5.0 * (m + 1) as f64;
            rows.push(ForecastRow {
                model_id: format!("model_{:02}", m + 1),
                task: key.clone(),
                output_type_id: None,
                value: truth + rng.random_range(-half_width..half_width),
            });
        }
        truths.push(OracleRow {
            task_values: vec![location],
            output_type: None,
            output_type_id: None,
            oracle_value: truth.round(),
        });
    }
    Ok(Panel {
        forecasts: ForecastTable::new(columns, Some(OutputType::Median), rows)?,
        oracle: OracleTable::new(vec!["location".to_string()], truths)?,
    })
}

/// Ensemble evaluations the algorithm needs for `n` models and `t` tasks.
pub fn expected_evaluations(algorithm: Algorithm, n: usize, t: usize) -> u64 {
    let per_task = match algorithm {
        Algorithm::Lomo => n as u64 + 1,
        Algorithm::Lasomo => (1u64 << n) - 1,
    };
    per_task * t as u64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub n_models: usize,
    pub n_tasks: usize,
    pub ensemble_evaluations: u64,
    pub expected_evaluations: u64,
    /// Sum of all importances; a cheap fingerprint of the results.
    pub importance_sum: f64,
}

#[derive(Clone, Debug)]
pub struct BenchCell {
    pub row: BenchRow,
    pub elapsed: Duration,
}

/// Runs every (models, tasks) cell of the grid. Each cell draws its data
/// from `seed` mixed with the cell coordinates.
pub fn run_grid(
    models_grid: &[usize],
    tasks_grid: &[usize],
    config: &ImportanceConfig,
    seed: u64,
) -> Result<Vec<BenchCell>> {
    for &n in models_grid {
        if n < 2 {
            bail!("the models grid must start at 2 or more, got {n}");
        }
        if config.algorithm == Algorithm::Lasomo && n > config.max_lasomo_models {
            bail!(
                "LASOMO with {n} models exceeds the cap of {} models (2^{n} - 1 = {} subsets per task)",
                config.max_lasomo_models,
                (1u128 << n.min(127)) - 1
            );
        }
    }
    if let Some(&0) = tasks_grid.iter().min() {
        bail!("the tasks grid must be positive");
    }
    let mut cells = Vec::new();
    for &n in models_grid {
        for &t in tasks_grid {
            let cell_seed = seed ^ ((n as u64) << 32) ^ t as u64;
            let panel = synthetic_panel(n, t, cell_seed)?;
            let start = Instant::now();
            let run = model_importance(&panel.forecasts, &panel.oracle, config)?;
            let elapsed = start.elapsed();
            let importance_sum = run.table.rows().iter().filter_map(|r| r.importance).sum();
            cells.push(BenchCell {
                row: BenchRow {
                    algorithm: config.algorithm.to_string(),
                    n_models: n,
                    n_tasks: t,
                    ensemble_evaluations: run.ensemble_evaluations,
                    expected_evaluations: expected_evaluations(config.algorithm, n, t),
                    importance_sum,
                },
                elapsed,
            });
        }
    }
    Ok(cells)
}

fn render(rows: &[BenchRow], format: TableFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        TableFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, rows)?;
            buf.push(b'\n');
        }
        TableFormat::Text => {
            let headers: Vec<String> = [
                "algorithm",
                "n_models",
                "n_tasks",
                "ensemble_evaluations",
                "expected_evaluations",
                "importance_sum",
            ]
            .map(String::from)
            .to_vec();
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.algorithm.clone(),
                        r.n_models.to_string(),
                        r.n_tasks.to_string(),
                        r.ensemble_evaluations.to_string(),
                        r.expected_evaluations.to_string(),
                        format!("{:.4}", r.importance_sum),
                    ]
                })
                .collect();
            let mut align = vec![Align::Right; headers.len()];
            align[0] = Align::Left;
            buf.extend_from_slice(render_table(&headers, &cells, &align).as_bytes());
        }
    }
    Ok(buf)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let config = importance_config(&args.importance);
    let cells = run_grid(&args.models_grid.0, &args.tasks_grid.0, &config, args.seed)?;

    let mut timings = String::from("algorithm,n_models,n_tasks,workers,elapsed_ms\n");
    for c in &cells {
        let ms = c.elapsed.as_secs_f64() * 1e3;
        writeln!(
            timings,
            "{},{},{},{},{ms:.3}",
            c.row.algorithm, c.row.n_models, c.row.n_tasks, config.workers
        )?;
        if !args.quiet {
            eprintln!(
                "{} n_models={} n_tasks={} workers={} elapsed={ms:.3} ms",
                c.row.algorithm, c.row.n_models, c.row.n_tasks, config.workers
            );
        }
    }
    if let Some(path) = &args.timings {
        emit(Some(path), timings.as_bytes())?;
    }
    let rows: Vec<BenchRow> = cells.into_iter().map(|c| c.row).collect();
    emit(args.output.as_deref(), &render(&rows, args.format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_case_needs_three_evaluations() {
        assert_eq!(expected_evaluations(Algorithm::Lomo, 2, 1), 3);
        assert_eq!(expected_evaluations(Algorithm::Lasomo, 2, 1), 3);
    }

    #[test]
    fn panel_is_reproducible() {
        let a = synthetic_panel(3, 4, 7).unwrap();
        let b = synthetic_panel(3, 4, 7).unwrap();
        assert_eq!(a.forecasts.rows(), b.forecasts.rows());
        assert_eq!(a.oracle.rows(), b.oracle.rows());
        assert_eq!(a.forecasts.len(), 12);
    }

    #[test]
    fn counts_match_formulas() {
        for algorithm in [Algorithm::Lomo, Algorithm::Lasomo] {
            let config = ImportanceConfig { algorithm, ..ImportanceConfig::default() };
            let cells = run_grid(&[2, 3, 5], &[1, 4], &config, 1).unwrap();
            for c in cells {
                assert_eq!(c.row.ensemble_evaluations, c.row.expected_evaluations);
            }
        }
    }

    #[test]
    fn lasomo_cap_is_enforced() {
        let config = ImportanceConfig {
            algorithm: Algorithm::Lasomo,
            max_lasomo_models: 4,
            ..ImportanceConfig::default()
        };
        let err = run_grid(&[5], &[1], &config, 1).unwrap_err();
        assert!(err.to_string().contains("cap of 4"), "{err}");
    }
}
