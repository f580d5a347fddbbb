//! Model-level summaries of a per-task importance table.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::TaskKey;
use crate::ensemble::median_in_place;
use crate::error::{Error, Result};
use crate::scores::{ImportanceTable, MODEL_ID, OUTPUT_TYPE};
use crate::text::{render_table, Align};

pub const DEFAULT_PREVIEW_ROWS: usize = 3;

/// How to treat a model that has no importance for a task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaAction {
    /// Leave the task out of that model's summary.
    #[default]
    Drop,
    /// Use the lowest importance any other model received on the task.
    Worst,
    /// Use the mean importance of the other models on the task.
    Average,
}

impl NaAction {
    pub fn as_str(self) -> &'static str {
        match self {
            NaAction::Drop => "drop",
            NaAction::Worst => "worst",
            NaAction::Average => "average",
        }
    }
}

impl fmt::Display for NaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NaAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drop" => Ok(NaAction::Drop),
            "worst" => Ok(NaAction::Worst),
            "average" => Ok(NaAction::Average),
            other => Err(Error::InvalidArgument(format!(
                "unknown NA action `{other}` (expected drop, worst or average)"
            ))),
        }
    }
}

/// Fills or removes the missing entries of one task's scores.
///
/// With `Drop` the missing entries are removed and the result holds only
/// `Some` values. `Worst` and `Average` need at least one observed score.
pub fn impute(
    task_scores: &BTreeMap<String, Option<f64>>,
    action: NaAction,
) -> Result<BTreeMap<String, Option<f64>>> {
    let observed: Vec<f64> = task_scores.values().flatten().copied().collect();
    let fill = match action {
        NaAction::Drop => {
            return Ok(task_scores
                .iter()
                .filter(|(_, v)| v.is_some())
                .map(|(k, v)| (k.clone(), *v))
                .collect())
        }
        _ if observed.is_empty() => {
            return Err(Error::InvalidArgument(format!(
                "cannot impute with `{action}`: every score in the task is missing"
            )))
        }
        NaAction::Worst => observed.iter().copied().fold(f64::INFINITY, f64::min),
        NaAction::Average => observed.iter().sum::<f64>() / observed.len() as f64,
    };
    Ok(task_scores
        .iter()
        .map(|(k, v)| (k.clone(), Some(v.unwrap_or(fill))))
        .collect())
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Summary statistic applied to each group of importances.
#[derive(Clone)]
pub enum SummaryFn {
    Mean,
    Median,
    /// Sample quantile with linear interpolation between order statistics.
    Quantile(f64),
    Custom { name: String, f: CustomFn },
}

impl SummaryFn {
    pub fn quantile(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "quantile probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(SummaryFn::Quantile(p))
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        SummaryFn::Custom { name: name.into(), f: Arc::new(f) }
    }

    /// Builds a built-in function from its name and `key=value` arguments.
    /// Only `quantile` takes an argument, `probs` (default 0.5).
    pub fn from_name(name: &str, args: &[(String, String)]) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        let unexpected = |k: &str| {
            Error::InvalidArgument(format!("`{name}` does not take an argument named `{k}`"))
        };
        match name.as_str() {
            "mean" | "median" => match args.first() {
                Some((k, _)) => Err(unexpected(k)),
                None if name == "mean" => Ok(SummaryFn::Mean),
                None => Ok(SummaryFn::Median),
            },
            "quantile" => {
                let mut p = 0.5;
                for (k, v) in args {
                    if k != "probs" {
                        return Err(unexpected(k));
                    }
                    p = v.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("probs must be a number, got `{v}`"))
                    })?;
                }
                SummaryFn::quantile(p)
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown summary function `{other}` (expected mean, median or quantile)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            SummaryFn::Mean => "mean",
            SummaryFn::Median => "median",
            SummaryFn::Quantile(_) => "quantile",
            SummaryFn::Custom { name, .. } => name,
        }
    }

    /// `None` for an empty group.
    pub fn apply(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        let v = match self {
            SummaryFn::Mean => values.iter().sum::<f64>() / values.len() as f64,
            SummaryFn::Median => median_in_place(&mut values.to_vec()),
            SummaryFn::Quantile(p) => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let h = (sorted.len() - 1) as f64 * p;
                let lo = h.floor() as usize;
                let hi = (lo + 1).min(sorted.len() - 1);
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            }
            SummaryFn::Custom { f, .. } => f(values),
        };
        (!v.is_nan()).then_some(v)
    }
}

impl fmt::Debug for SummaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryFn::Quantile(p) => write!(f, "Quantile({p})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    /// Values of the grouping columns, in `by` order.
    pub group: Vec<String>,
    /// `None` when every entry of the group was dropped.
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateTable {
    by: Vec<String>,
    value_column: String,
    rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn by(&self) -> &[String] {
        &self.by
    }

    pub fn value_column(&self) -> &str {
        &self.value_column
    }

    pub fn rows(&self) -> &[AggregateRow] {
        &self.rows
    }

    pub fn get(&self, group: &[&str]) -> Option<Option<f64>> {
        self.rows
            .iter()
            .find(|r| r.group.iter().map(String::as_str).eq(group.iter().copied()))
            .map(|r| r.value)
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = self.by.clone();
        cols.push(self.value_column.clone());
        cols
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(self.columns())?;
        for row in &self.rows {
            let mut rec = row.group.clone();
            rec.push(row.value.map_or_else(|| "NA".to_string(), |v| v.to_string()));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (c, v) in self.by.iter().zip(&row.group) {
                    obj.insert(c.clone(), Value::String(v.clone()));
                }
                obj.insert(
                    self.value_column.clone(),
                    row.value
                        .and_then(serde_json::Number::from_f64)
                        .map_or(Value::Null, Value::Number),
                );
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut writer, &rows)?;
        writeln!(writer)?;
        Ok(())
    }
}

/// One decimal place; a group with no scores shows `NA`.
impl fmt::Display for AggregateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Overall model importance across tasks")?;
        writeln!(f, "----------------------------------------")?;
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut rec = r.group.clone();
                rec.push(r.value.map_or_else(|| "NA".to_string(), |v| format!("{v:.1}")));
                rec
            })
            .collect();
        let mut align = vec![Align::Left; self.by.len()];
        align.push(Align::Right);
        f.write_str(&render_table(&self.columns(), &rows, &align))
    }
}

/// Imputes missing importances task by task, then summarizes each group
/// formed by the `by` columns. Rows come out in decreasing order of the
/// summary; groups with no remaining scores go last, and ties keep the
/// lexicographic order of the group values.
pub fn aggregate(
    table: &ImportanceTable,
    by: &[String],
    na_action: NaAction,
    fun: &SummaryFn,
) -> Result<AggregateTable> {
    if by.is_empty() {
        return Err(Error::InvalidArgument("`by` needs at least one column".into()));
    }
    let known = table.columns();
    for col in by {
        if col == crate::scores::IMPORTANCE || !known.contains(col) {
            return Err(Error::InvalidArgument(format!(
                "cannot group by `{col}`; available columns: {}",
                known[..known.len() - 1].join(", ")
            )));
        }
    }

    let mut per_task: BTreeMap<&TaskKey, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for row in table.rows() {
        per_task
            .entry(&row.task)
            .or_default()
            .insert(row.model_id.clone(), row.importance);
    }
    let mut imputed: BTreeMap<&TaskKey, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for (task, scores) in &per_task {
        let filled = impute(scores, na_action).map_err(|e| e.in_task(task))?;
        imputed.insert(task, filled);
    }

    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for row in table.rows() {
        let key: Vec<String> = by
            .iter()
            .map(|col| match col.as_str() {
                MODEL_ID => row.model_id.clone(),
                OUTPUT_TYPE => row.output_type.to_string(),
                other => row.task.get(other).unwrap_or_default().to_string(),
            })
            .collect();
        let values = groups.entry(key).or_default();
        if let Some(Some(v)) = imputed[&row.task].get(&row.model_id) {
            values.push(*v);
        }
    }

    let mut rows: Vec<AggregateRow> = groups
        .into_iter()
        .map(|(group, values)| AggregateRow { value: fun.apply(&values), group })
        .collect();
    // The BTreeMap already yields groups in lexicographic order and the sort
    // is stable, so ties keep that order.
    rows.sort_by(|a, b| match (a.value, b.value) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(AggregateTable {
        by: by.to_vec(),
        value_column: format!("importance_score_{}", fun.name()),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    /// Number of tasks in the table, whether or not the model scored on them.
    pub n_tasks: usize,
    pub min_importance: Option<f64>,
    pub max_importance: Option<f64>,
    #[serde(rename = "n_NA")]
    pub n_na: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskWinner {
    pub task: TaskKey,
    pub top_model: String,
    pub max_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub n_models: usize,
    pub n_tasks: usize,
    pub task_columns: Vec<String>,
    pub all_tasks: Vec<TaskKey>,
    pub model_summary: Vec<ModelSummary>,
    /// One entry per task that has at least one score.
    pub task_winners: Vec<TaskWinner>,
    pub preview_rows: usize,
}

/// Counts, per-model ranges and the best model of every task. Ties for the
/// best score go to the lexicographically smallest model id.
pub fn summarize(table: &ImportanceTable, preview_rows: usize) -> Result<SummaryReport> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty importance table".into()));
    }
    let all_tasks: Vec<TaskKey> = table.tasks().into_iter().cloned().collect();
    let n_tasks = all_tasks.len();

    let mut by_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut by_task: BTreeMap<&TaskKey, BTreeMap<&str, f64>> = BTreeMap::new();
    for row in table.rows() {
        let scores = by_model.entry(&row.model_id).or_default();
        if let Some(v) = row.importance {
            scores.push(v);
            by_task.entry(&row.task).or_default().insert(&row.model_id, v);
        }
    }

    let model_summary = by_model
        .into_iter()
        .map(|(model, scores)| ModelSummary {
            model_id: model.to_string(),
            n_tasks,
            min_importance: scores.iter().copied().reduce(f64::min),
            max_importance: scores.iter().copied().reduce(f64::max),
            n_na: n_tasks - scores.len().min(n_tasks),
        })
        .collect::<Vec<_>>();

    let task_winners = by_task
        .into_iter()
        .filter_map(|(task, scores)| {
            let mut best: Option<(&str, f64)> = None;
            for (model, v) in scores {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((model, v));
                }
            }
            best.map(|(model, v)| TaskWinner {
                task: task.clone(),
                top_model: model.to_string(),
                max_score: v,
            })
        })
        .collect();

    Ok(SummaryReport {
        n_models: model_summary.len(),
        n_tasks,
        task_columns: table.task_columns().to_vec(),
        all_tasks,
        model_summary,
        task_winners,
        preview_rows,
    })
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

impl SummaryReport {
    fn winners_table(&self, winners: &[TaskWinner], score_header: &str) -> String {
        let mut headers = self.task_columns.clone();
        headers.push("top_model".into());
        headers.push(score_header.into());
        let rows: Vec<Vec<String>> = winners
            .iter()
            .map(|w| {
                let mut rec = w.task.values().to_vec();
                rec.push(w.top_model.clone());
                rec.push(fmt2(Some(w.max_score)));
                rec
            })
            .collect();
        let mut align = vec![Align::Left; headers.len()];
        *align.last_mut().unwrap() = Align::Right;
        render_table(&headers, &rows, &align)
    }

    /// Full listing of the task list, per-model summary and task winners.
    pub fn details(&self) -> String {
        let mut out = String::from("=== all_tasks ===\n");
        let rows: Vec<Vec<String>> = self.all_tasks.iter().map(|t| t.values().to_vec()).collect();
        out.push_str(&render_table(&self.task_columns, &rows, &[]));

        out.push_str("\n=== model_summary ===\n");
        let headers: Vec<String> = ["model_id", "n_tasks", "min_importance", "max_importance", "n_NA"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = self
            .model_summary
            .iter()
            .map(|m| {
                vec![
                    m.model_id.clone(),
                    m.n_tasks.to_string(),
                    fmt2(m.min_importance),
                    fmt2(m.max_importance),
                    m.n_na.to_string(),
                ]
            })
            .collect();
        let align = [Align::Left, Align::Right, Align::Right, Align::Right, Align::Right];
        out.push_str(&render_table(&headers, &rows, &align));

        out.push_str("\n=== task_winners ===\n");
        out.push_str(&self.winners_table(&self.task_winners, "max_score"));
        out
    }
}

impl fmt::Display for SummaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "=== Summary of importance scores by task ===")?;
        writeln!(f, "Number of models: {}", self.n_models)?;
        writeln!(f, "Number of tasks: {}", self.n_tasks)?;
        writeln!(f)?;
        writeln!(f, "=== Top scoring model by task for a subset of tasks ===")?;
        let shown = &self.task_winners[..self.preview_rows.min(self.task_winners.len())];
        if !shown.is_empty() {
            f.write_str(&self.winners_table(shown, "importance"))?;
        }
        writeln!(f, "--------------------------------------------")?;
        writeln!(f, "* More details: all_tasks, model_summary, task_winners.")
    }
}
