use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the pipeline. Each variant names the
/// precondition that failed so the CLI can surface it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input has no header row")]
    MissingHeader,

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{column}` row {row}: `{value}` is not numeric")]
    NotNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("sensitive attribute has {0} observed categories, need at least 2")]
    TooFewCategories(usize),

    #[error("no rows left after dropping missing values")]
    NoRows,

    #[error("cell has all-zero counts")]
    EmptyCell,

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{function}: argument {value} outside domain {domain}")]
    Domain {
        function: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("operation requires K = 2 categories, table has K = {0}")]
    NotBinary(usize),

    #[error("table contains heterogeneous cells; operation requires all cells homogeneous")]
    HeterogeneousCell,

    #[error("series did not reach tail mass {tol:e} within {cap} terms")]
    SeriesCap { cap: usize, tol: f64 },

    #[error("target risk {target} outside achievable range ({lower}, {upper})")]
    TargetOutOfRange { target: f64, lower: f64, upper: f64 },

    #[error("no overdispersion: moment denominator {0} <= 0")]
    NoOverdispersion(f64),

    #[error("degenerate proportion p = {0}")]
    DegenerateProportion(f64),

    #[error("moment estimate for category {index} is not positive ({value})")]
    NonPositiveEstimate { index: usize, value: f64 },

    #[error("size variance {variance} <= mean {mean}; use a Poisson model instead")]
    NoSizeOverdispersion { mean: f64, variance: f64 },

    #[error("tvd inputs: {0}")]
    TvdInput(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
