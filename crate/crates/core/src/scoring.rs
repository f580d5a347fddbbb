//! Positively oriented scoring rules: higher is better.
//!
//! | output type | score |
//! |-------------|-------|
//! | mean        | −(q − y)² |
//! | median      | −\|q − y\| |
//! | quantile    | −WIS |
//! | pmf         | max(ln p(y), min_log_score) |

use std::fmt;

use crate::ensemble::Forecast;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_LOG_SCORE: f64 = -10.0;

/// Observed outcome of a task.
#[derive(Clone, Debug, PartialEq)]
pub enum TruthValue {
    Numeric(f64),
    /// Realized category of a pmf target.
    Category(String),
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthValue::Numeric(v) => write!(f, "{v}"),
            TruthValue::Category(c) => f.write_str(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Score(f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weighted interval score in its quantile (pinball-loss) form:
/// `(1/K) Σ 2 (1{y ≤ q_k} − τ_k)(q_k − y)`.
pub fn wis(levels: &[f64], values: &[f64], y: f64) -> Result<f64> {
    if levels.len() != values.len() {
        return Err(Error::Scoring(format!(
            "{} levels but {} values",
            levels.len(),
            values.len()
        )));
    }
    if levels.is_empty() {
        return Err(Error::Scoring("empty quantile forecast".into()));
    }
    let total: f64 = levels
        .iter()
        .zip(values)
        .map(|(&tau, &q)| {
            let below = if y <= q { 1.0 } else { 0.0 };
            2.0 * (below - tau) * (q - y)
        })
        .sum();
    Ok(total / levels.len() as f64)
}

pub fn score(forecast: &Forecast, truth: &TruthValue, min_log_score: f64) -> Result<Score> {
    if !(min_log_score <= 0.0 && min_log_score.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "min_log_score must be a finite non-positive number, got {min_log_score}"
        )));
    }
    let value = match (forecast, truth) {
        (Forecast::Mean(q), TruthValue::Numeric(y)) => -(q - y).powi(2),
        (Forecast::Median(q), TruthValue::Numeric(y)) => -(q - y).abs(),
        (Forecast::Quantile(f), TruthValue::Numeric(y)) => -wis(f.levels(), f.values(), *y)?,
        (Forecast::Pmf(f), TruthValue::Category(label)) => {
            let p = f.prob(label).ok_or_else(|| {
                Error::Scoring(format!("observed category `{label}` is not among the forecast's categories"))
            })?;
            p.ln().max(min_log_score)
        }
        (f, t) => {
            return Err(Error::Scoring(format!(
                "cannot score a {} forecast against truth `{t}`",
                f.output_type()
            )))
        }
    };
    if !value.is_finite() {
        return Err(Error::Scoring(format!("non-finite score {value}")));
    }
    Ok(Score(value))
}
