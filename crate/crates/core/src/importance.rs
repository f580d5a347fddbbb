//! Per-task model importance.
//!
//! LOMO scores model `i` as `ψ(F^A) − ψ(F^{A∖{i}})`. LASOMO averages the
//! marginal gain `ψ(F^{S∪{i}}) − ψ(F^S)` over every non-empty subset `S` of
//! the other models, weighting each subset either uniformly or by its size
//! (the permutation-based, Shapley-style weights).
//!
//! Subsets are bitmasks over the task's models in `model_id` order. LASOMO
//! scores each of the `2^n − 1` subset ensembles once and reuses the table
//! for every target model.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::data::{
    join_oracle, validate, ForecastTable, OracleTable, TaskBundle, TaskKey, ValidationPolicy,
    ValidationReport, MIN_MODELS_PER_TASK,
};
use crate::ensemble::{EnsembleSpec, Forecast};
use crate::error::{Error, Result};
use crate::scores::{ImportanceRow, ImportanceTable};
use crate::scoring::{score, DEFAULT_MIN_LOG_SCORE};

pub const DEFAULT_MAX_LASOMO_MODELS: usize = 16;
/// Largest model count for which exact subset weights fit in `u128`.
const MAX_WEIGHT_MODELS: usize = 64;
/// Hard ceiling on the LASOMO cap: the subset table holds `2^n` scores.
pub const HARD_MAX_LASOMO_MODELS: usize = 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightScheme {
    #[default]
    Equal,
    PermBased,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Equal => "equal",
            WeightScheme::PermBased => "perm_based",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(WeightScheme::Equal),
            "perm_based" => Ok(WeightScheme::PermBased),
            other => Err(Error::InvalidArgument(format!(
                "unknown subset weighting `{other}` (expected equal or perm_based)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algorithm {
    #[default]
    Lomo,
    Lasomo,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Lomo => "lomo",
            Algorithm::Lasomo => "lasomo",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lomo" => Ok(Algorithm::Lomo),
            "lasomo" => Ok(Algorithm::Lasomo),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}` (expected lomo or lasomo)"
            ))),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact weight of one subset of size `k` when the task has `n` models.
///
/// `equal`: `1 / (2^(n−1) − 1)`; `perm_based`: `1 / ((n − 1) · C(n − 1, k))`.
pub fn subset_weight_exact(n: usize, k: usize, scheme: WeightScheme) -> Result<Ratio<u128>> {
    if !(2..=MAX_WEIGHT_MODELS).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "subset weights need 2 <= n <= {MAX_WEIGHT_MODELS}, got n = {n}"
        )));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "subset size k = {k} outside [1, {}]",
            n - 1
        )));
    }
    let denom = match scheme {
        WeightScheme::Equal => (1u128 << (n - 1)) - 1,
        WeightScheme::PermBased => (n as u128 - 1) * binomial(n as u128 - 1, k as u128),
    };
    Ok(Ratio::new(1, denom))
}

pub fn subset_weight(n: usize, k: usize, scheme: WeightScheme) -> Result<f64> {
    let w = subset_weight_exact(n, k, scheme)?;
    Ok(*w.numer() as f64 / *w.denom() as f64)
}

/// Importance of every submitting model for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskImportance {
    pub scores: BTreeMap<String, f64>,
    /// Distinct ensembles built for this task.
    pub ensemble_evaluations: u64,
}

fn check_bundle(bundle: &TaskBundle) -> Result<()> {
    if bundle.forecasts.len() < MIN_MODELS_PER_TASK {
        return Err(Error::Validation(format!(
            "task has {} model(s); at least {MIN_MODELS_PER_TASK} are required",
            bundle.forecasts.len()
        ))
        .in_task(&bundle.key));
    }
    Ok(())
}

fn ensemble_score(
    members: &[&Forecast],
    bundle: &TaskBundle,
    spec: &EnsembleSpec,
    min_log_score: f64,
) -> Result<f64> {
    let ensemble = spec.build(members)?;
    Ok(score(&ensemble, &bundle.truth, min_log_score)?.value())
}

pub fn lomo_task(
    bundle: &TaskBundle,
    spec: &EnsembleSpec,
    min_log_score: f64,
) -> Result<TaskImportance> {
    check_bundle(bundle)?;
    let models: Vec<(&String, &Forecast)> = bundle.forecasts.iter().collect();
    let all: Vec<&Forecast> = models.iter().map(|(_, f)| *f).collect();
    let run = || -> Result<BTreeMap<String, f64>> {
        let full = ensemble_score(&all, bundle, spec, min_log_score)?;
        let mut scores = BTreeMap::new();
        for (i, (model, _)) in models.iter().enumerate() {
            let others: Vec<&Forecast> = all
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, f)| *f)
                .collect();
            let without = ensemble_score(&others, bundle, spec, min_log_score)?;
            scores.insert((*model).clone(), full - without);
        }
        Ok(scores)
    };
    let scores = run().map_err(|e| e.in_task(&bundle.key))?;
    Ok(TaskImportance {
        scores,
        ensemble_evaluations: models.len() as u64 + 1,
    })
}

/// Scores of the ensembles of every non-empty subset of a task's models.
#[derive(Clone, Debug)]
pub struct SubsetScores {
    models: Vec<String>,
    scores: Vec<f64>,
}

impl SubsetScores {
    pub fn compute(
        bundle: &TaskBundle,
        spec: &EnsembleSpec,
        min_log_score: f64,
        max_models: usize,
    ) -> Result<Self> {
        let n = bundle.forecasts.len();
        let cap = max_models.min(HARD_MAX_LASOMO_MODELS);
        if n > cap {
            return Err(Error::TooManyModels {
                n_models: n,
                cap,
                subsets: if n >= 128 { u128::MAX } else { (1u128 << n) - 1 },
            }
            .in_task(&bundle.key));
        }
        let forecasts: Vec<&Forecast> = bundle.forecasts.values().collect();
        let mut scores = vec![f64::NAN; 1usize << n];
        let mut members = Vec::with_capacity(n);
        for (mask, slot) in scores.iter_mut().enumerate().skip(1) {
            members.clear();
            members.extend((0..n).filter(|b| mask & (1 << b) != 0).map(|b| forecasts[b]));
            *slot = ensemble_score(&members, bundle, spec, min_log_score)
                .map_err(|e| e.in_task(&bundle.key))?;
        }
        Ok(SubsetScores {
            models: bundle.forecasts.keys().cloned().collect(),
            scores,
        })
    }

    /// Model ids; bit `b` of a mask refers to `models()[b]`.
    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn get(&self, mask: usize) -> Option<f64> {
        (mask != 0).then(|| self.scores.get(mask).copied()).flatten()
    }

    pub fn evaluations(&self) -> u64 {
        self.scores.len() as u64 - 1
    }

    /// `ψ(F^{S∪{i}}) − ψ(F^S)` for model index `i` and subset `s` not containing it.
    pub fn marginal(&self, i: usize, s: usize) -> f64 {
        let bit = 1usize << i;
        debug_assert!(s & bit == 0 && s != 0);
        self.scores[s | bit] - self.scores[s]
    }
}

pub fn lasomo_task(
    bundle: &TaskBundle,
    spec: &EnsembleSpec,
    scheme: WeightScheme,
    min_log_score: f64,
    max_models: usize,
) -> Result<TaskImportance> {
    check_bundle(bundle)?;
    let table = SubsetScores::compute(bundle, spec, min_log_score, max_models)?;
    let n = table.models.len();
    let weights = (1..n)
        .map(|k| subset_weight(n, k, scheme))
        .collect::<Result<Vec<f64>>>()?;
    let full = (1usize << n) - 1;
    let mut scores = BTreeMap::new();
    for (i, model) in table.models.iter().enumerate() {
        let rest = full ^ (1 << i);
        let mut phi = 0.0;
        // Submasks of `rest` in increasing order.
        let mut s = rest & rest.wrapping_neg();
        while s != 0 {
            let k = s.count_ones() as usize;
            phi += weights[k - 1] * table.marginal(i, s);
            s = (s.wrapping_sub(rest)) & rest;
        }
        scores.insert(model.clone(), phi);
    }
    Ok(TaskImportance {
        scores,
        ensemble_evaluations: table.evaluations(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceConfig {
    pub ensemble: EnsembleSpec,
    pub algorithm: Algorithm,
    pub subset_wt: WeightScheme,
    pub min_log_score: f64,
    pub validation: ValidationPolicy,
    pub workers: usize,
    pub max_lasomo_models: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            ensemble: EnsembleSpec::default(),
            algorithm: Algorithm::default(),
            subset_wt: WeightScheme::default(),
            min_log_score: DEFAULT_MIN_LOG_SCORE,
            validation: ValidationPolicy::default(),
            workers: 1,
            max_lasomo_models: DEFAULT_MAX_LASOMO_MODELS,
        }
    }
}

impl ImportanceConfig {
    fn check(&self) -> Result<()> {
        if !(self.min_log_score <= 0.0 && self.min_log_score.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "min_log_score must be a finite non-positive number, got {}",
                self.min_log_score
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn evaluate(&self, bundle: &TaskBundle) -> Result<TaskImportance> {
        match self.algorithm {
            Algorithm::Lomo => lomo_task(bundle, &self.ensemble, self.min_log_score),
            Algorithm::Lasomo => lasomo_task(
                bundle,
                &self.ensemble,
                self.subset_wt,
                self.min_log_score,
                self.max_lasomo_models,
            ),
        }
    }
}

/// Informational summary of the inputs, printed before a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunHeader {
    pub date_range: Option<(chrono::NaiveDate, chrono::NaiveDate)>,
    pub n_dates: usize,
    pub models: Vec<String>,
    pub workers: usize,
    pub excluded: Vec<TaskKey>,
}

impl RunHeader {
    fn new(report: &ValidationReport, workers: usize) -> Self {
        RunHeader {
            date_range: report.date_range(),
            n_dates: report.forecast_dates.len(),
            models: report.models.clone(),
            workers,
            excluded: report.excluded.iter().cloned().collect(),
        }
    }
}

impl fmt::Display for RunHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.date_range {
            Some((first, last)) => writeln!(
                f,
                "Evaluating forecasts from {first} to {last}  (a total of {} forecast date(s)).",
                self.n_dates
            )?,
            None => writeln!(f, "No forecasts to evaluate.")?,
        }
        writeln!(f)?;
        writeln!(f, "The available model IDs are:")?;
        for m in &self.models {
            writeln!(f, "     {m}")?;
        }
        writeln!(f, "(a total of {} models)", self.models.len())?;
        writeln!(f)?;
        writeln!(
            f,
            "Note: tasks are independent and run on {} worker thread(s); raise the worker count to parallelize.",
            self.workers
        )?;
        writeln!(f)?;
        if self.excluded.is_empty() {
            write!(
                f,
                "All tasks meet the minimum model requirement of {MIN_MODELS_PER_TASK} models."
            )
        } else {
            writeln!(f, "{} task(s) failed validation and were excluded:", self.excluded.len())?;
            for (i, task) in self.excluded.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "     {task}")?;
            }
            Ok(())
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImportanceRun {
    pub table: ImportanceTable,
    pub header: RunHeader,
    pub report: ValidationReport,
    pub warnings: Vec<String>,
    pub ensemble_evaluations: u64,
}

/// Evaluates every task independently on `workers` threads; results keep bundle order.
pub fn evaluate_tasks(bundles: &[TaskBundle], config: &ImportanceConfig) -> Result<Vec<TaskImportance>> {
    config.check()?;
    if config.workers == 1 {
        return bundles.iter().map(|b| config.evaluate(b)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<TaskImportance>> =
        pool.install(|| bundles.par_iter().map(|b| config.evaluate(b)).collect());
    results.into_iter().collect()
}

/// Importance of every model for every task of `forecasts`.
pub fn model_importance(
    forecasts: &ForecastTable,
    oracle: &OracleTable,
    config: &ImportanceConfig,
) -> Result<ImportanceRun> {
    config.check()?;
    if let Some(t) = forecasts.output_type() {
        if !config.ensemble.supports(t) {
            return Err(Error::InvalidArgument(format!(
                "ensemble {} does not support output type {t}",
                config.ensemble
            )));
        }
    }
    let report = validate(forecasts, config.validation)?;
    let kept = if report.excluded.is_empty() {
        Cow::Borrowed(forecasts)
    } else {
        Cow::Owned(forecasts.without_tasks(&report.excluded))
    };
    let bundles = join_oracle(&kept, oracle)?;
    let results = evaluate_tasks(&bundles, config)?;

    let models: BTreeSet<&str> = kept.models();
    let mut rows = Vec::with_capacity(bundles.len() * models.len());
    let mut evaluations = 0;
    for (bundle, result) in bundles.iter().zip(&results) {
        evaluations += result.ensemble_evaluations;
        for model in &models {
            rows.push(ImportanceRow {
                model_id: model.to_string(),
                task: bundle.key.clone(),
                output_type: kept.output_type().expect("non-empty table has a type"),
                importance: result.scores.get(*model).copied(),
            });
        }
    }
    let mut warnings = Vec::new();
    if bundles.is_empty() {
        warnings.push("no tasks left to evaluate; the importance table is empty".to_string());
    }
    Ok(ImportanceRun {
        table: ImportanceTable::new(forecasts.task_columns_arc().clone(), rows),
        header: RunHeader::new(&report, config.workers),
        report,
        warnings,
        ensemble_evaluations: evaluations,
    })
}
