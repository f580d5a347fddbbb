//! Hub-style long-format forecast and oracle tables.
//!
//! A forecast table holds one row per prediction component: the submitting
//! model, the task-ID columns that identify the prediction task, the output
//! type and its identifier (quantile level or pmf category), and the value.
//! The oracle table carries the observed value for each task, keyed by a
//! subset of the same task-ID columns.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ensemble::Forecast;
use crate::error::{Error, Result};
use crate::scoring::TruthValue;

pub const REFERENCE_DATE: &str = "reference_date";
pub const DEFAULT_REFERENCE_DATE_ALIASES: [&str; 3] =
    ["reference_date", "forecast_date", "origin_date"];
pub const MIN_MODELS_PER_TASK: usize = 2;
pub const PMF_SUM_TOLERANCE: f64 = 1e-6;

const MODEL_ID: &str = "model_id";
const OUTPUT_TYPE: &str = "output_type";
const OUTPUT_TYPE_ID: &str = "output_type_id";
const VALUE: &str = "value";
const ORACLE_VALUE: &str = "oracle_value";
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputType {
    Mean,
    Median,
    Quantile,
    Pmf,
}

impl OutputType {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputType::Mean => "mean",
            OutputType::Median => "median",
            OutputType::Quantile => "quantile",
            OutputType::Pmf => "pmf",
        }
    }

    /// Quantile and pmf rows are identified by `output_type_id`; point rows are not.
    pub fn has_output_type_id(self) -> bool {
        matches!(self, OutputType::Quantile | OutputType::Pmf)
    }
}

impl fmt::Display for OutputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(OutputType::Mean),
            "median" => Ok(OutputType::Median),
            "quantile" => Ok(OutputType::Quantile),
            "pmf" => Ok(OutputType::Pmf),
            other => Err(Error::UnsupportedOutputType(other.to_string())),
        }
    }
}

/// Identity of one prediction task: the values of every task-ID column, in
/// ingest column order (with `reference_date` first).
///
/// Keys sort column by column. Within a column, values that parse as finite
/// numbers sort numerically and ahead of non-numeric values, which sort as
/// plain strings. This keeps horizons `1, 2, 10` in natural order.
#[derive(Clone, Debug)]
pub struct TaskKey {
    columns: Arc<[String]>,
    values: Vec<String>,
}

impl TaskKey {
    pub fn new(columns: Arc<[String]>, values: Vec<String>) -> Self {
        assert_eq!(columns.len(), values.len(), "task key arity mismatch");
        TaskKey { columns, values }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn columns_arc(&self) -> &Arc<[String]> {
        &self.columns
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|i| self.values[i].as_str())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.columns
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(String::as_str))
    }
}

pub(crate) fn compare_cell(a: &str, b: &str) -> Ordering {
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

impl PartialEq for TaskKey {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.columns == other.columns
    }
}

impl Eq for TaskKey {}

impl std::hash::Hash for TaskKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.values.hash(state);
    }
}

impl Ord for TaskKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| compare_cell(a, b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.values.len().cmp(&other.values.len()))
            .then_with(|| self.columns.cmp(&other.columns))
    }
}

impl PartialOrd for TaskKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, v)) in self.pairs().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for TaskKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (c, v) in self.pairs() {
            map.serialize_entry(c, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for TaskKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = IndexMap::<String, String>::deserialize(deserializer)?;
        let (columns, values): (Vec<_>, Vec<_>) = map.into_iter().unzip();
        Ok(TaskKey::new(columns.into(), values))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRow {
    pub model_id: String,
    pub task: TaskKey,
    pub output_type_id: Option<String>,
    pub value: f64,
}

/// Rows of a forecast table, grouped by task then by model.
pub type TaskGroups<'a> = BTreeMap<TaskKey, BTreeMap<&'a str, Vec<&'a ForecastRow>>>;

#[derive(Clone, Debug)]
pub struct ForecastTable {
    task_columns: Arc<[String]>,
    output_type: Option<OutputType>,
    rows: Vec<ForecastRow>,
}

impl ForecastTable {
    /// Builds a table from already-typed rows.
    ///
    /// `task_columns` must start with `reference_date`; every row's task key
    /// must use exactly these columns. `output_type` may only be `None` for
    /// an empty table.
    pub fn new(
        task_columns: Arc<[String]>,
        output_type: Option<OutputType>,
        rows: Vec<ForecastRow>,
    ) -> Result<Self> {
        if task_columns.first().map(String::as_str) != Some(REFERENCE_DATE) {
            return Err(Error::ReferenceDate(format!(
                "task columns must start with `{REFERENCE_DATE}`"
            )));
        }
        if !rows.is_empty() && output_type.is_none() {
            return Err(Error::InvalidArgument(
                "a non-empty table needs an output type".into(),
            ));
        }
        for row in &rows {
            if row.task.columns() != &task_columns[..] {
                return Err(Error::InvalidArgument(format!(
                    "row for model `{}` has task columns {:?}, expected {:?}",
                    row.model_id,
                    row.task.columns(),
                    task_columns
                )));
            }
            if row.model_id.is_empty() {
                return Err(Error::InvalidArgument("empty model_id".into()));
            }
        }
        Ok(ForecastTable {
            task_columns,
            output_type,
            rows,
        })
    }

    pub fn task_columns(&self) -> &[String] {
        &self.task_columns
    }

    pub fn task_columns_arc(&self) -> &Arc<[String]> {
        &self.task_columns
    }

    pub fn output_type(&self) -> Option<OutputType> {
        self.output_type
    }

    pub fn rows(&self) -> &[ForecastRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.model_id.as_str()).collect()
    }

    pub fn group_by_task(&self) -> TaskGroups<'_> {
        let mut groups: TaskGroups<'_> = BTreeMap::new();
        for row in &self.rows {
            groups
                .entry(row.task.clone())
                .or_default()
                .entry(row.model_id.as_str())
                .or_default()
                .push(row);
        }
        groups
    }

    /// Copy of the table without the rows of the given tasks.
    pub fn without_tasks(&self, excluded: &BTreeSet<TaskKey>) -> ForecastTable {
        ForecastTable {
            task_columns: Arc::clone(&self.task_columns),
            output_type: self.output_type,
            rows: self
                .rows
                .iter()
                .filter(|r| !excluded.contains(&r.task))
                .cloned()
                .collect(),
        }
    }

    /// Writes the table back out in the standard column layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec![MODEL_ID.to_string()];
        header.extend(self.task_columns.iter().cloned());
        header.extend([OUTPUT_TYPE, OUTPUT_TYPE_ID, VALUE].map(String::from));
        out.write_record(&header)?;
        let output_type = self.output_type.map(OutputType::as_str).unwrap_or("");
        for row in &self.rows {
            let mut record = vec![row.model_id.clone()];
            record.extend(row.task.values().iter().cloned());
            record.push(output_type.to_string());
            record.push(row.output_type_id.clone().unwrap_or_default());
            record.push(row.value.to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Renames the single reference-date alias present in `headers` to
/// `reference_date`.
pub fn standardize_reference_date(headers: &[String], aliases: &[&str]) -> Result<Vec<String>> {
    let found: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| aliases.contains(&h.as_str()))
        .map(|(i, _)| i)
        .collect();
    match found.as_slice() {
        [] => Err(Error::ReferenceDate(format!(
            "none of the columns {aliases:?} is present"
        ))),
        [i] => {
            let mut renamed = headers.to_vec();
            renamed[*i] = REFERENCE_DATE.to_string();
            Ok(renamed)
        }
        many => Err(Error::ReferenceDate(format!(
            "ambiguous, found {}",
            many.iter()
                .map(|&i| format!("`{}`", headers[i]))
                .collect::<Vec<_>>()
                .join(" and ")
        ))),
    }
}

fn parse_date(raw: &str, line: u64) -> Result<String> {
    NaiveDate::parse_from_str(raw.trim(), DATE_FORMAT)
        .map(|d| d.format(DATE_FORMAT).to_string())
        .map_err(|_| Error::Parse {
            line,
            message: format!("unparseable {REFERENCE_DATE} `{raw}` (expected YYYY-MM-DD)"),
        })
}

fn parse_number(raw: &str, column: &str, line: u64) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable {column} `{raw}`"),
        })
}

fn missing_id(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t == "NA"
}

/// Canonical text of a quantile level, so that `0.50` and `0.5` join.
pub fn canonical_level(raw: &str) -> Option<String> {
    let t = raw.trim();
    let level: f64 = t.parse().ok()?;
    if !(level > 0.0 && level < 1.0) {
        return None;
    }
    let plain = t.chars().all(|c| c.is_ascii_digit() || c == '.') && t.matches('.').count() <= 1;
    if !plain {
        return Some(level.to_string());
    }
    let mut s = t.to_string();
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    let s = s.trim_start_matches('0');
    Some(if s.starts_with('.') {
        format!("0{s}")
    } else {
        s.to_string()
    })
}

fn column_index(headers: &[String], name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Parses a CSV forecast table using the default reference-date aliases.
pub fn parse_forecast_table<R: Read>(source: R) -> Result<ForecastTable> {
    parse_forecast_table_with_aliases(source, &DEFAULT_REFERENCE_DATE_ALIASES)
}

pub fn parse_forecast_table_with_aliases<R: Read>(
    source: R,
    aliases: &[&str],
) -> Result<ForecastTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let raw_headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let headers = standardize_reference_date(&raw_headers, aliases)?;

    let required = |name: &str| {
        column_index(&headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let model_col = required(MODEL_ID)?;
    let type_col = required(OUTPUT_TYPE)?;
    let value_col = required(VALUE)?;
    let id_col = column_index(&headers, OUTPUT_TYPE_ID);
    let ref_col = required(REFERENCE_DATE)?;

    let reserved = [Some(model_col), Some(type_col), Some(value_col), id_col];
    let mut task_idx = vec![ref_col];
    task_idx.extend(
        (0..headers.len()).filter(|i| *i != ref_col && !reserved.contains(&Some(*i))),
    );
    let task_columns: Arc<[String]> = task_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut output_type: Option<OutputType> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let model_id = record[model_col].trim().to_string();
        if model_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty model_id".into(),
            });
        }
        let row_type: OutputType = record[type_col].parse()?;
        match output_type {
            None => output_type = Some(row_type),
            Some(t) if t != row_type => {
                return Err(Error::MixedOutputTypes {
                    first: t.to_string(),
                    second: row_type.to_string(),
                })
            }
            Some(_) => {}
        }
        let raw_id = id_col.map(|i| &record[i]).unwrap_or("");
        let output_type_id = match row_type {
            OutputType::Mean | OutputType::Median => {
                if !missing_id(raw_id) {
                    return Err(Error::Parse {
                        line,
                        message: format!("{row_type} rows must have an empty output_type_id, got `{raw_id}`"),
                    });
                }
                None
            }
            OutputType::Quantile => Some(canonical_level(raw_id).ok_or_else(|| Error::Parse {
                line,
                message: format!("quantile level `{raw_id}` is not a number in (0, 1)"),
            })?),
            OutputType::Pmf => {
                if missing_id(raw_id) {
                    return Err(Error::Parse {
                        line,
                        message: "pmf rows need a category in output_type_id".into(),
                    });
                }
                Some(raw_id.trim().to_string())
            }
        };
        let value = parse_number(&record[value_col], VALUE, line)?;
        let mut values = Vec::with_capacity(task_idx.len());
        values.push(parse_date(&record[ref_col], line)?);
        values.extend(task_idx[1..].iter().map(|&i| record[i].to_string()));
        rows.push(ForecastRow {
            model_id,
            task: TaskKey::new(Arc::clone(&task_columns), values),
            output_type_id,
            value,
        });
    }
    Ok(ForecastTable {
        task_columns,
        output_type,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub task_values: Vec<String>,
    pub output_type: Option<OutputType>,
    pub output_type_id: Option<String>,
    pub oracle_value: f64,
}

#[derive(Clone, Debug)]
pub struct OracleTable {
    task_columns: Vec<String>,
    rows: Vec<OracleRow>,
}

impl OracleTable {
    pub fn new(task_columns: Vec<String>, rows: Vec<OracleRow>) -> Result<Self> {
        if let Some(row) = rows.iter().find(|r| r.task_values.len() != task_columns.len()) {
            return Err(Error::InvalidArgument(format!(
                "oracle row has {} task values for {} columns",
                row.task_values.len(),
                task_columns.len()
            )));
        }
        Ok(OracleTable { task_columns, rows })
    }

    pub fn task_columns(&self) -> &[String] {
        &self.task_columns
    }

    pub fn rows(&self) -> &[OracleRow] {
        &self.rows
    }
}

/// Parses a CSV oracle table. A reference-date alias, when present, is
/// standardized the same way as in forecast tables.
pub fn parse_oracle_table<R: Read>(source: R) -> Result<OracleTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let raw_headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let present = raw_headers
        .iter()
        .filter(|h| DEFAULT_REFERENCE_DATE_ALIASES.contains(&h.as_str()))
        .count();
    let headers = if present == 0 {
        raw_headers
    } else {
        standardize_reference_date(&raw_headers, &DEFAULT_REFERENCE_DATE_ALIASES)?
    };

    let value_col = column_index(&headers, ORACLE_VALUE)
        .ok_or_else(|| Error::MissingColumn(ORACLE_VALUE.to_string()))?;
    let type_col = column_index(&headers, OUTPUT_TYPE);
    let id_col = column_index(&headers, OUTPUT_TYPE_ID);
    let ref_col = column_index(&headers, REFERENCE_DATE);
    let task_idx: Vec<usize> = (0..headers.len())
        .filter(|i| *i != value_col && Some(*i) != type_col && Some(*i) != id_col)
        .collect();
    let task_columns = task_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let task_values = task_idx
            .iter()
            .map(|&i| {
                if Some(i) == ref_col {
                    parse_date(&record[i], line)
                } else {
                    Ok(record[i].to_string())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let output_type = match type_col.map(|i| record[i].trim()) {
            None | Some("") | Some("NA") => None,
            Some(t) => Some(t.parse()?),
        };
        let output_type_id = id_col
            .map(|i| &record[i])
            .filter(|raw| !missing_id(raw))
            .map(|raw| raw.trim().to_string());
        rows.push(OracleRow {
            task_values,
            output_type,
            output_type_id,
            oracle_value: parse_number(&record[value_col], ORACLE_VALUE, line)?,
        });
    }
    Ok(OracleTable {
        task_columns,
        rows,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationPolicy {
    /// Any violation aborts the run.
    #[default]
    Error,
    /// Offending tasks are excluded and the run continues.
    Skip,
}

impl FromStr for ValidationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(ValidationPolicy::Error),
            "skip" => Ok(ValidationPolicy::Skip),
            other => Err(Error::InvalidArgument(format!(
                "unknown validation policy `{other}` (expected error or skip)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BelowMinimumModels {
        task: TaskKey,
        n_models: usize,
    },
    OutputTypeIdMismatch {
        task: TaskKey,
        models: Vec<String>,
    },
    DuplicateEntry {
        task: TaskKey,
        model: String,
        output_type_id: Option<String>,
    },
    PmfOutOfRange {
        task: TaskKey,
        model: String,
        value: f64,
    },
    PmfNotNormalized {
        task: TaskKey,
        model: String,
        sum: f64,
    },
}

impl Violation {
    pub fn task(&self) -> &TaskKey {
        match self {
            Violation::BelowMinimumModels { task, .. }
            | Violation::OutputTypeIdMismatch { task, .. }
            | Violation::DuplicateEntry { task, .. }
            | Violation::PmfOutOfRange { task, .. }
            | Violation::PmfNotNormalized { task, .. } => task,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BelowMinimumModels { task, n_models } => write!(
                f,
                "task [{task}] has {n_models} model(s), below the minimum model requirement of {MIN_MODELS_PER_TASK} models"
            ),
            Violation::OutputTypeIdMismatch { task, models } => write!(
                f,
                "task [{task}]: output_type_id values differ between models ({})",
                models.join(", ")
            ),
            Violation::DuplicateEntry {
                task,
                model,
                output_type_id,
            } => write!(
                f,
                "task [{task}]: model `{model}` has duplicate rows for output_type_id `{}`",
                output_type_id.as_deref().unwrap_or("")
            ),
            Violation::PmfOutOfRange { task, model, value } => write!(
                f,
                "task [{task}]: model `{model}` has pmf value {value} outside [0, 1]"
            ),
            Violation::PmfNotNormalized { task, model, sum } => write!(
                f,
                "task [{task}]: model `{model}` pmf sums to {sum}, not 1"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub models: Vec<String>,
    pub forecast_dates: Vec<NaiveDate>,
    pub tasks: Vec<TaskKey>,
    pub violations: Vec<Violation>,
    pub excluded: BTreeSet<TaskKey>,
}

impl ValidationReport {
    /// Inspects a table without applying any policy; nothing is excluded.
    pub fn inspect(table: &ForecastTable) -> ValidationReport {
        let groups = table.group_by_task();
        let mut violations = Vec::new();
        for (task, by_model) in &groups {
            if by_model.len() < MIN_MODELS_PER_TASK {
                violations.push(Violation::BelowMinimumModels {
                    task: task.clone(),
                    n_models: by_model.len(),
                });
            }
            let mut id_sets: Vec<(&str, BTreeSet<Option<&str>>)> = Vec::new();
            for (model, rows) in by_model {
                let mut ids = BTreeSet::new();
                for row in rows {
                    if !ids.insert(row.output_type_id.as_deref()) {
                        violations.push(Violation::DuplicateEntry {
                            task: task.clone(),
                            model: model.to_string(),
                            output_type_id: row.output_type_id.clone(),
                        });
                    }
                }
                if table.output_type() == Some(OutputType::Pmf) {
                    if let Some(row) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.value)) {
                        violations.push(Violation::PmfOutOfRange {
                            task: task.clone(),
                            model: model.to_string(),
                            value: row.value,
                        });
                    }
                    let sum: f64 = rows.iter().map(|r| r.value).sum();
                    if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
                        violations.push(Violation::PmfNotNormalized {
                            task: task.clone(),
                            model: model.to_string(),
                            sum,
                        });
                    }
                }
                id_sets.push((model, ids));
            }
            if let Some((_, reference)) = id_sets.first() {
                let odd: Vec<String> = id_sets
                    .iter()
                    .filter(|(_, ids)| ids != reference)
                    .map(|(m, _)| m.to_string())
                    .collect();
                if !odd.is_empty() {
                    let mut models = vec![id_sets[0].0.to_string()];
                    models.extend(odd);
                    violations.push(Violation::OutputTypeIdMismatch {
                        task: task.clone(),
                        models,
                    });
                }
            }
        }
        let forecast_dates: BTreeSet<NaiveDate> = groups
            .keys()
            .filter_map(|k| k.get(REFERENCE_DATE))
            .filter_map(|d| NaiveDate::parse_from_str(d, DATE_FORMAT).ok())
            .collect();
        ValidationReport {
            models: table.models().into_iter().map(String::from).collect(),
            forecast_dates: forecast_dates.into_iter().collect(),
            tasks: groups.into_keys().collect(),
            violations,
            excluded: BTreeSet::new(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((*self.forecast_dates.first()?, *self.forecast_dates.last()?))
    }

    pub fn below_minimum(&self) -> Vec<&TaskKey> {
        self.violations
            .iter()
            .filter_map(|v| match v {
                Violation::BelowMinimumModels { task, .. } => Some(task),
                _ => None,
            })
            .collect()
    }
}

/// Checks a forecast table and applies `policy` to any violation found.
pub fn validate(table: &ForecastTable, policy: ValidationPolicy) -> Result<ValidationReport> {
    let mut report = ValidationReport::inspect(table);
    if report.is_clean() {
        return Ok(report);
    }
    match policy {
        ValidationPolicy::Error => {
            let first = &report.violations[0];
            let more = report.violations.len() - 1;
            Err(Error::Validation(if more == 0 {
                first.to_string()
            } else {
                format!("{first} (and {more} more violation(s))")
            }))
        }
        ValidationPolicy::Skip => {
            report.excluded = report.violations.iter().map(|v| v.task().clone()).collect();
            Ok(report)
        }
    }
}

/// One prediction task ready for scoring.
#[derive(Clone, Debug)]
pub struct TaskBundle {
    pub key: TaskKey,
    pub forecasts: BTreeMap<String, Forecast>,
    pub truth: TruthValue,
}

enum OracleEntry {
    Value(f64),
    Categories(Vec<(String, f64)>),
}

/// Attaches truth to every task of `table`. Bundles come out in sorted task order.
pub fn join_oracle(table: &ForecastTable, oracle: &OracleTable) -> Result<Vec<TaskBundle>> {
    let Some(output_type) = table.output_type() else {
        return Ok(Vec::new());
    };
    let positions = oracle
        .task_columns()
        .iter()
        .map(|c| {
            table.task_columns().iter().position(|t| t == c).ok_or_else(|| {
                Error::Join(format!(
                    "oracle column `{c}` is not a task-ID column of the forecast table"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut index: HashMap<Vec<String>, OracleEntry> = HashMap::new();
    for row in oracle.rows() {
        if row.output_type.is_some_and(|t| t != output_type) {
            continue;
        }
        let describe = || {
            oracle
                .task_columns()
                .iter()
                .zip(&row.task_values)
                .map(|(c, v)| format!("{c}={v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        if output_type == OutputType::Pmf {
            let Some(category) = row.output_type_id.clone() else {
                return Err(Error::Join(format!(
                    "pmf oracle row [{}] has no output_type_id",
                    describe()
                )));
            };
            let entry = index
                .entry(row.task_values.clone())
                .or_insert_with(|| OracleEntry::Categories(Vec::new()));
            if let OracleEntry::Categories(cats) = entry {
                if cats.iter().any(|(c, _)| *c == category) {
                    return Err(Error::Join(format!(
                        "duplicate oracle rows for [{}], category `{category}`",
                        describe()
                    )));
                }
                cats.push((category, row.oracle_value));
            }
        } else if index
            .insert(row.task_values.clone(), OracleEntry::Value(row.oracle_value))
            .is_some()
        {
            return Err(Error::Join(format!(
                "duplicate oracle rows for [{}]",
                describe()
            )));
        }
    }

    let mut bundles = Vec::new();
    for (key, by_model) in table.group_by_task() {
        let shared: Vec<String> = positions.iter().map(|&i| key.values()[i].clone()).collect();
        let truth = match index.get(&shared) {
            None => {
                return Err(Error::Join(format!("no oracle row matches task [{key}]")));
            }
            Some(OracleEntry::Value(v)) => TruthValue::Numeric(*v),
            Some(OracleEntry::Categories(cats)) => {
                let realized: Vec<&String> = cats
                    .iter()
                    .filter(|(_, v)| *v == 1.0)
                    .map(|(c, _)| c)
                    .collect();
                match realized.as_slice() {
                    [one] => TruthValue::Category((*one).clone()),
                    [] => {
                        return Err(Error::Join(format!(
                            "no realized category (oracle_value 1) for task [{key}]"
                        )))
                    }
                    _ => {
                        return Err(Error::Join(format!(
                            "more than one realized category for task [{key}]"
                        )))
                    }
                }
            }
        };
        let mut forecasts = BTreeMap::new();
        for (model, rows) in by_model {
            let points = rows
                .iter()
                .map(|r| (r.output_type_id.clone(), r.value))
                .collect();
            let forecast = Forecast::from_points(output_type, points)
                .map_err(|e| e.in_task(format!("{key}; model {model}")))?;
            forecasts.insert(model.to_string(), forecast);
        }
        bundles.push(TaskBundle {
            key,
            forecasts,
            truth,
        });
    }
    Ok(bundles)
}
