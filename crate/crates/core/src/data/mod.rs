//! Cohort schema, loading, partitioning, preprocessing and synthetic cohorts.

mod cohort;
mod preprocess;
mod schema;
mod split;
pub mod synth;

pub use cohort::{
    load_cohort, load_patients, read_cohort, write_cohort, CohortTable, DemographicValue, Patient,
    PatientRecord,
};
pub use preprocess::{ClinicalGroup, FeatureGroup, Preprocessor};
pub use schema::{CategoricalColumn, ColumnKind, DemographicColumn, FeatureSchema};
pub use split::{split_cohort, CohortSplit, SplitIndices};
pub use synth::{generate_cohort, LabelModel, SynthConfig};

use thiserror::Error;

/// Row-major feature matrix produced by [`Preprocessor::transform`].
pub type FeatureMatrix = ndarray::Array2<f64>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {0}: label is not binary")]
    NonBinaryLabel(usize),
    #[error("row {row}: missing basic value in column `{column}`")]
    MissingBasicValue { row: usize, column: String },
    #[error("row {row}: unknown category `{token}` in column `{column}`")]
    UnknownCategory {
        row: usize,
        column: String,
        token: String,
    },
    #[error("row {row}: `{token}` is not a number (column `{column}`)")]
    InvalidNumber {
        row: usize,
        column: String,
        token: String,
    },
    #[error("row {row}: advanced-availability indicator must be 0 or 1, got `{token}`")]
    InvalidIndicator { row: usize, token: String },
    #[error("duplicate patient id `{0}`")]
    DuplicateId(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("test size {requested} exceeds {available} advanced-available rows")]
    TestTooLarge { requested: usize, available: usize },
    #[error("preprocessor needs at least 2 rows, got {0}")]
    EmptyFit(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("patient `{0}` has no advanced features")]
    AdvancedUnavailable(String),
    #[error("unknown patient id `{0}` in split")]
    UnknownId(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
