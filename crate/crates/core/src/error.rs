use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("noncentrality parameter {0} outside supported range |ncp| <= 40")]
    UnsupportedNcp(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported covariate count k = {0} (expected 1, 3 or 5 without a custom matrix)")]
    UnsupportedCovariateCount(usize),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("collinear design (reciprocal condition number {rcond:e})")]
    CollinearDesign { rcond: f64 },

    #[error("group {group} has {rows} rows, at least {needed} required")]
    GroupTooSmall { group: usize, rows: usize, needed: usize },

    #[error("spec {spec}: {failures} of {iterations} iterations failed")]
    ExcessiveFailures {
        spec: String,
        failures: usize,
        iterations: usize,
    },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("variable `{0}` is constant")]
    DegenerateVariable(String),

    #[error("insufficient groups: {0}")]
    InsufficientGroups(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Variant name, used to tally failures by kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::UnsupportedNcp(_) => "UnsupportedNcp",
            Error::Domain(_) => "Domain",
            Error::UnsupportedCovariateCount(_) => "UnsupportedCovariateCount",
            Error::IndexOutOfRange(_) => "IndexOutOfRange",
            Error::CollinearDesign { .. } => "CollinearDesign",
            Error::GroupTooSmall { .. } => "GroupTooSmall",
            Error::ExcessiveFailures { .. } => "ExcessiveFailures",
            Error::InvalidPlan(_) => "InvalidPlan",
            Error::Config { .. } => "Config",
            Error::Parse { .. } => "Parse",
            Error::MissingValue { .. } => "MissingValue",
            Error::Validation(_) => "Validation",
            Error::DegenerateVariable(_) => "DegenerateVariable",
            Error::InsufficientGroups(_) => "InsufficientGroups",
            Error::Io(_) => "Io",
        }
    }
}
