use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter value (bad counts, out-of-range weights, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Structural validation failure on input data.
    #[error("invalid data: {0}")]
    Validation(String),

    /// A cell of an input file failed to parse.
    #[error("format error at row {row}, column '{column}': {message}")]
    Format {
        row: usize,
        column: String,
        message: String,
    },

    /// A statistic is undefined because a required variance is zero.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Design matrix has fewer observed rows than columns.
    #[error("rank deficiency: {0}")]
    Rank(String),

    /// Exact enumeration would exceed the combinatorial budget.
    #[error("problem too large: {0}")]
    Size(String),

    /// A metric is undefined for this input (e.g. zero denominator).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 for user/validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Validation(_)
            | Error::Format { .. }
            | Error::Size(_)
            | Error::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
