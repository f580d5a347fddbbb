use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unsupported output type `{0}`")]
    UnsupportedOutputType(String),

    #[error("table mixes output types `{first}` and `{second}`; only one output type is allowed")]
    MixedOutputTypes { first: String, second: String },

    #[error("reference date column: {0}")]
    ReferenceDate(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("oracle join failed: {0}")]
    Join(String),

    #[error("ensemble error: {0}")]
    Ensemble(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LASOMO over {n_models} models needs 2^{n_models} - 1 = {subsets} subset ensembles per task, above the cap of {cap} models")]
    TooManyModels {
        n_models: usize,
        cap: usize,
        subsets: u128,
    },

    #[error("task [{task}]: {source}")]
    Task {
        task: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_task(self, task: impl std::fmt::Display) -> Error {
        Error::Task {
            task: task.to_string(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by the environment rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            Error::Task { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
