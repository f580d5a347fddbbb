//! Component-model importance for multi-model ensemble forecasts.
//!
//! A model's importance on a prediction task measures how much it improves
//! the ensemble's score there. Two algorithms are provided:
//!
//! * **LOMO** (leave one model out): the full ensemble's score minus the
//!   score of the ensemble built without the model.
//! * **LASOMO** (leave all subsets of models out): a weighted sum of the
//!   model's marginal contribution over every subset of the other models,
//!   with equal or permutation-based (Shapley) weights.
//!
//! Forecasts and observations come in as long-format tables
//! ([`parse_forecast_table`], [`parse_oracle_table`]); [`model_importance`]
//! produces a per-task [`ImportanceTable`] that [`aggregate`] and
//! [`summarize`] condense into model-level results.
//!
//! ```
//! use modelimp::{model_importance, parse_forecast_table, parse_oracle_table, ImportanceConfig};
//!
//! let forecasts = "\
//! model_id,reference_date,location,output_type,output_type_id,value
//! a,2022-11-19,25,median,,10
//! b,2022-11-19,25,median,,14
//! ";
//! let oracle = "location,oracle_value\n25,11\n";
//! let run = model_importance(
//!     &parse_forecast_table(forecasts.as_bytes())?,
//!     &parse_oracle_table(oracle.as_bytes())?,
//!     &ImportanceConfig::default(),
//! )?;
//! // Ensemble of both: 12, |12 - 11| = 1. Alone, a errs by 1 and b by 3.
//! let imp: Vec<f64> = run.table.rows().iter().map(|r| r.importance.unwrap()).collect();
//! assert_eq!(imp, [2.0, 0.0]);
//! # Ok::<(), modelimp::Error>(())
//! ```

pub mod data;
pub mod ensemble;
pub mod error;
pub mod importance;
pub mod scores;
pub mod scoring;
pub mod summarize;
pub mod text;

pub use data::{
    join_oracle, parse_forecast_table, parse_oracle_table, validate, ForecastTable, OracleTable,
    OutputType, TaskBundle, TaskKey, ValidationPolicy, ValidationReport,
};
pub use ensemble::{AggFun, EnsembleSpec, Forecast};
pub use error::{Error, Result};
pub use importance::{
    lasomo_task, lomo_task, model_importance, subset_weight, Algorithm, ImportanceConfig,
    ImportanceRun, WeightScheme,
};
pub use scores::{ImportanceRow, ImportanceTable};
pub use scoring::{score, wis, TruthValue};
pub use summarize::{aggregate, impute, summarize, AggregateTable, NaAction, SummaryFn, SummaryReport};
