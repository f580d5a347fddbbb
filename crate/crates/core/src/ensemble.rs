//! Component forecasts and the two ensemble constructions.
//!
//! `simple_ensemble` aggregates component values per output-type id (quantile
//! averaging, i.e. Vincentization, for quantile forecasts). `linear_pool`
//! builds the equally weighted mixture of the component distributions.
//!
//! For quantile forecasts the mixture has no closed form. Each component's
//! quantile function is taken to be piecewise linear through its knots and
//! linearly extrapolated past the outermost pair; it is evaluated on the grid
//! `(j + 0.5) / grid_size`, all grid values are pooled, and the pooled sample
//! is read back at the original levels.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::data::OutputType;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 4095;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantileForecast {
    levels: Arc<[f64]>,
    values: Vec<f64>,
}

impl QuantileForecast {
    /// Levels must be distinct and in (0, 1); points are sorted by level.
    pub fn new(levels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if levels.len() != values.len() {
            return Err(Error::Ensemble(format!(
                "{} quantile levels but {} values",
                levels.len(),
                values.len()
            )));
        }
        if levels.is_empty() {
            return Err(Error::Ensemble("empty quantile forecast".into()));
        }
        let mut points: Vec<(f64, f64)> = levels.into_iter().zip(values).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Ensemble(format!("duplicate quantile level {}", w[0].0)));
            }
        }
        if let Some((l, _)) = points.iter().find(|(l, _)| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Ensemble(format!("quantile level {l} outside (0, 1)")));
        }
        let (levels, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        Ok(QuantileForecast {
            levels: levels.into(),
            values,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmfForecast {
    categories: Arc<[String]>,
    probs: Vec<f64>,
}

impl PmfForecast {
    /// Categories must be distinct; points are sorted by category label.
    pub fn new(categories: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if categories.len() != probs.len() {
            return Err(Error::Ensemble(format!(
                "{} categories but {} probabilities",
                categories.len(),
                probs.len()
            )));
        }
        if categories.is_empty() {
            return Err(Error::Ensemble("empty pmf forecast".into()));
        }
        let mut points: Vec<(String, f64)> = categories.into_iter().zip(probs).collect();
        points.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Ensemble(format!("duplicate pmf category `{}`", w[0].0)));
        }
        let (categories, probs): (Vec<String>, Vec<f64>) = points.into_iter().unzip();
        Ok(PmfForecast {
            categories: categories.into(),
            probs,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.probs[i])
    }
}

/// One model's (or one ensemble's) prediction for a single task.
#[derive(Clone, Debug, PartialEq)]
pub enum Forecast {
    Mean(f64),
    Median(f64),
    Quantile(QuantileForecast),
    Pmf(PmfForecast),
}

impl Forecast {
    pub fn output_type(&self) -> OutputType {
        match self {
            Forecast::Mean(_) => OutputType::Mean,
            Forecast::Median(_) => OutputType::Median,
            Forecast::Quantile(_) => OutputType::Quantile,
            Forecast::Pmf(_) => OutputType::Pmf,
        }
    }

    /// The value of a mean or median forecast.
    pub fn as_point(&self) -> Option<f64> {
        match self {
            Forecast::Mean(v) | Forecast::Median(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_quantile(&self) -> Option<&QuantileForecast> {
        match self {
            Forecast::Quantile(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_pmf(&self) -> Option<&PmfForecast> {
        match self {
            Forecast::Pmf(p) => Some(p),
            _ => None,
        }
    }

    pub fn quantile(levels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        QuantileForecast::new(levels, values).map(Forecast::Quantile)
    }

    pub fn pmf<S: Into<String>>(points: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let (cats, probs): (Vec<String>, Vec<f64>) =
            points.into_iter().map(|(c, p)| (c.into(), p)).unzip();
        PmfForecast::new(cats, probs).map(Forecast::Pmf)
    }

    /// Builds a forecast from table rows `(output_type_id, value)`.
    pub fn from_points(output_type: OutputType, points: Vec<(Option<String>, f64)>) -> Result<Self> {
        match output_type {
            OutputType::Mean | OutputType::Median => {
                let [(None, value)] = points.as_slice() else {
                    return Err(Error::Ensemble(format!(
                        "{output_type} forecast needs exactly one row without output_type_id, got {}",
                        points.len()
                    )));
                };
                Ok(if output_type == OutputType::Mean {
                    Forecast::Mean(*value)
                } else {
                    Forecast::Median(*value)
                })
            }
            OutputType::Quantile => {
                let mut levels = Vec::with_capacity(points.len());
                let mut values = Vec::with_capacity(points.len());
                for (id, v) in points {
                    let level = id
                        .as_deref()
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| Error::Ensemble(format!("bad quantile level {id:?}")))?;
                    levels.push(level);
                    values.push(v);
                }
                Forecast::quantile(levels, values)
            }
            OutputType::Pmf => {
                let mut cats = Vec::with_capacity(points.len());
                let mut probs = Vec::with_capacity(points.len());
                for (id, p) in points {
                    cats.push(id.ok_or_else(|| Error::Ensemble("pmf row without category".into()))?);
                    probs.push(p);
                }
                PmfForecast::new(cats, probs).map(Forecast::Pmf)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AggFun {
    #[default]
    Mean,
    Median,
}

impl AggFun {
    fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            AggFun::Mean => values.iter().sum::<f64>() / values.len() as f64,
            AggFun::Median => median_in_place(values),
        }
    }
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// The ensemble function applied to every (sub)set of component forecasts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleSpec {
    Simple(AggFun),
    LinearPool { grid_size: usize },
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec::Simple(AggFun::Mean)
    }
}

impl EnsembleSpec {
    pub fn supports(&self, output_type: OutputType) -> bool {
        match self {
            EnsembleSpec::Simple(_) => true,
            EnsembleSpec::LinearPool { .. } => output_type != OutputType::Median,
        }
    }

    pub fn build(&self, forecasts: &[&Forecast]) -> Result<Forecast> {
        match *self {
            EnsembleSpec::Simple(agg) => simple_ensemble(forecasts, agg),
            EnsembleSpec::LinearPool { grid_size } => linear_pool(forecasts, grid_size),
        }
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleSpec::Simple(AggFun::Mean) => f.write_str("simple_mean"),
            EnsembleSpec::Simple(AggFun::Median) => f.write_str("simple_median"),
            EnsembleSpec::LinearPool { .. } => f.write_str("linear_pool"),
        }
    }
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple_mean" | "simple_ensemble" => Ok(EnsembleSpec::Simple(AggFun::Mean)),
            "simple_median" => Ok(EnsembleSpec::Simple(AggFun::Median)),
            "linear_pool" => Ok(EnsembleSpec::LinearPool {
                grid_size: DEFAULT_GRID_SIZE,
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown ensemble `{other}` (expected simple_mean, simple_median or linear_pool)"
            ))),
        }
    }
}

fn check_common(forecasts: &[&Forecast]) -> Result<OutputType> {
    let first = forecasts
        .first()
        .ok_or_else(|| Error::Ensemble("cannot ensemble an empty set of forecasts".into()))?;
    let output_type = first.output_type();
    for f in &forecasts[1..] {
        let same_ids = match (first, f) {
            (Forecast::Mean(_), Forecast::Mean(_)) | (Forecast::Median(_), Forecast::Median(_)) => true,
            (Forecast::Quantile(a), Forecast::Quantile(b)) => a.levels == b.levels,
            (Forecast::Pmf(a), Forecast::Pmf(b)) => a.categories == b.categories,
            _ => {
                return Err(Error::Ensemble(format!(
                    "cannot ensemble {output_type} with {} forecasts",
                    f.output_type()
                )))
            }
        };
        if !same_ids {
            return Err(Error::Ensemble(
                "component forecasts have different output_type_id sets".into(),
            ));
        }
    }
    Ok(output_type)
}

/// Per-id values of every component, in component order.
fn columns(forecasts: &[&Forecast]) -> Vec<Vec<f64>> {
    let width = match forecasts[0] {
        Forecast::Mean(_) | Forecast::Median(_) => 1,
        Forecast::Quantile(q) => q.values.len(),
        Forecast::Pmf(p) => p.probs.len(),
    };
    (0..width)
        .map(|j| {
            forecasts
                .iter()
                .map(|f| match f {
                    Forecast::Mean(v) | Forecast::Median(v) => *v,
                    Forecast::Quantile(q) => q.values[j],
                    Forecast::Pmf(p) => p.probs[j],
                })
                .collect()
        })
        .collect()
}

fn with_values(template: &Forecast, values: Vec<f64>) -> Forecast {
    match template {
        Forecast::Mean(_) => Forecast::Mean(values[0]),
        Forecast::Median(_) => Forecast::Median(values[0]),
        Forecast::Quantile(q) => Forecast::Quantile(QuantileForecast {
            levels: Arc::clone(&q.levels),
            values,
        }),
        Forecast::Pmf(p) => Forecast::Pmf(PmfForecast {
            categories: Arc::clone(&p.categories),
            probs: values,
        }),
    }
}

/// Aggregates component values per output-type id with `agg`.
pub fn simple_ensemble(forecasts: &[&Forecast], agg: AggFun) -> Result<Forecast> {
    check_common(forecasts)?;
    if forecasts.len() == 1 {
        return Ok(forecasts[0].clone());
    }
    let values = columns(forecasts)
        .into_iter()
        .map(|mut col| agg.apply(&mut col))
        .collect();
    Ok(with_values(forecasts[0], values))
}

/// Equally weighted mixture of the component distributions.
pub fn linear_pool(forecasts: &[&Forecast], grid_size: usize) -> Result<Forecast> {
    let output_type = check_common(forecasts)?;
    if output_type == OutputType::Median {
        return Err(Error::Ensemble(
            "linear_pool supports only mean, quantile and pmf output types".into(),
        ));
    }
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid_size must be positive".into()));
    }
    if forecasts.len() == 1 {
        return Ok(forecasts[0].clone());
    }
    if output_type != OutputType::Quantile {
        return simple_ensemble(forecasts, AggFun::Mean);
    }

    let components: Vec<&QuantileForecast> = forecasts
        .iter()
        .map(|f| match f {
            Forecast::Quantile(q) => q,
            _ => unreachable!("checked above"),
        })
        .collect();
    let mut pooled = Vec::with_capacity(components.len() * grid_size);
    for q in &components {
        for j in 0..grid_size {
            let p = (j as f64 + 0.5) / grid_size as f64;
            pooled.push(interp_inverse_cdf(q, p)?);
        }
    }
    pooled.sort_by(f64::total_cmp);
    let values = components[0]
        .levels
        .iter()
        .map(|&tau| pooled_quantile(&pooled, tau))
        .collect();
    Ok(with_values(forecasts[0], values))
}

/// Quantile of a sorted sample where point `m` sits at probability `(m + 0.5) / N`.
fn pooled_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let h = tau * n as f64 - 0.5;
    if h <= 0.0 {
        return sorted[0];
    }
    if h >= (n - 1) as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Piecewise-linear quantile function through the forecast's knots, with
/// linear extrapolation from the two outermost knots on either side.
pub fn interp_inverse_cdf(forecast: &QuantileForecast, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1)")));
    }
    let (levels, values) = (&forecast.levels[..], &forecast.values[..]);
    let k = levels.len();
    if k < 2 {
        return Err(Error::Ensemble(
            "interpolating a quantile function needs at least two levels".into(),
        ));
    }
    let upper = levels.partition_point(|&l| l < p);
    if upper < k && levels[upper] == p {
        return Ok(values[upper]);
    }
    let lo = upper.saturating_sub(1).min(k - 2);
    let slope = (values[lo + 1] - values[lo]) / (levels[lo + 1] - levels[lo]);
    Ok(values[lo] + (p - levels[lo]) * slope)
}
