//! The per-task importance table and its CSV / JSON / text forms.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::data::{OutputType, TaskKey};
use crate::error::{Error, Result};
use crate::text::{render_table, Align};

pub const MODEL_ID: &str = "model_id";
pub const OUTPUT_TYPE: &str = "output_type";
pub const IMPORTANCE: &str = "importance";
const MISSING: &str = "NA";

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceRow {
    pub model_id: String,
    pub task: TaskKey,
    pub output_type: OutputType,
    /// `None` when the model did not forecast this task.
    pub importance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceTable {
    task_columns: Arc<[String]>,
    rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    pub fn new(task_columns: Arc<[String]>, rows: Vec<ImportanceRow>) -> Self {
        ImportanceTable { task_columns, rows }
    }

    pub fn task_columns(&self) -> &[String] {
        &self.task_columns
    }

    pub fn rows(&self) -> &[ImportanceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `model_id`, the task-ID columns, `output_type`, `importance`.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec![MODEL_ID.to_string()];
        cols.extend(self.task_columns.iter().cloned());
        cols.push(OUTPUT_TYPE.to_string());
        cols.push(IMPORTANCE.to_string());
        cols
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.model_id.as_str()).collect()
    }

    pub fn tasks(&self) -> BTreeSet<&TaskKey> {
        self.rows.iter().map(|r| &r.task).collect()
    }

    fn record(row: &ImportanceRow) -> Vec<String> {
        let mut rec = vec![row.model_id.clone()];
        rec.extend(row.task.values().iter().cloned());
        rec.push(row.output_type.to_string());
        rec.push(row.importance.map_or_else(|| MISSING.to_string(), |v| v.to_string()));
        rec
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(self.columns())?;
        for row in &self.rows {
            out.write_record(Self::record(row))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Array of flat row objects keyed by column name.
    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                obj.insert(MODEL_ID.into(), Value::String(row.model_id.clone()));
                for (c, v) in row.task.pairs() {
                    obj.insert(c.into(), Value::String(v.into()));
                }
                obj.insert(OUTPUT_TYPE.into(), Value::String(row.output_type.to_string()));
                obj.insert(
                    IMPORTANCE.into(),
                    row.importance
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

    fn from_records(headers: Vec<String>, records: Vec<(u64, Vec<String>)>) -> Result<Self> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let (model_col, type_col, imp_col) = (find(MODEL_ID)?, find(OUTPUT_TYPE)?, find(IMPORTANCE)?);
        let task_idx: Vec<usize> = (0..headers.len())
            .filter(|i| ![model_col, type_col, imp_col].contains(i))
            .collect();
        let task_columns: Arc<[String]> = task_idx.iter().map(|&i| headers[i].clone()).collect();
        let mut rows = Vec::with_capacity(records.len());
        for (line, rec) in records {
            let raw = rec[imp_col].trim();
            let importance = if raw.is_empty() || raw == MISSING {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("unparseable importance `{raw}`"),
                })?)
            };
            rows.push(ImportanceRow {
                model_id: rec[model_col].clone(),
                task: TaskKey::new(
                    Arc::clone(&task_columns),
                    task_idx.iter().map(|&i| rec[i].clone()).collect(),
                ),
                output_type: rec[type_col].parse()?,
                importance,
            });
        }
        Ok(ImportanceTable { task_columns, rows })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, rec.iter().map(String::from).collect()));
        }
        Self::from_records(headers, records)
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        // Keys keep their document order (serde_json's `preserve_order`).
        let rows: Vec<Map<String, Value>> = serde_json::from_reader(reader)?;
        let Some(first) = rows.first() else {
            return Ok(ImportanceTable::new(Arc::from(Vec::new()), Vec::new()));
        };
        let headers: Vec<String> = first.keys().cloned().collect();
        let mut records = Vec::with_capacity(rows.len());
        for (i, obj) in rows.iter().enumerate() {
            let rec = headers
                .iter()
                .map(|h| match obj.get(h) {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Number(n)) => Ok(n.to_string()),
                    Some(Value::Null) | None => Ok(String::new()),
                    Some(other) => Err(Error::Parse {
                        line: i as u64 + 1,
                        message: format!("unexpected JSON value {other} for `{h}`"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            records.push((i as u64 + 1, rec));
        }
        Self::from_records(headers, records)
    }

    /// Reads either format, telling them apart by the first non-blank byte.
    pub fn read_any<R: Read>(mut reader: R) -> Result<Self> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        match buf.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'[') => Self::read_json(buf.as_slice()),
            _ => Self::read_csv(buf.as_slice()),
        }
    }
}

/// Grouped by task, importance rounded to two decimals.
impl fmt::Display for ImportanceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Model importance result by task")?;
        writeln!(f, "---------------------------------")?;
        let headers = self.columns();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut rec = Self::record(row);
                if let Some(v) = row.importance {
                    *rec.last_mut().unwrap() = format!("{v:.2}");
                }
                rec
            })
            .collect();
        let mut align = vec![Align::Left; headers.len()];
        *align.last_mut().unwrap() = Align::Right;
        f.write_str(&render_table(&headers, &rows, &align))
    }
}
