use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("duplicate observation for entity `{entity}` in period {period}")]
    DuplicateObservation { entity: String, period: i64 },

    #[error("row {row}, column `{column}`: `{token}` is not a number")]
    NonNumeric {
        row: usize,
        column: String,
        token: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("non-positive value {value} at period index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error(
        "variable `{variable}`, entity `{entity}`, period {period}: non-positive value {value}"
    )]
    NonPositiveAt {
        variable: String,
        entity: String,
        period: i64,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("group `{group}`: column `{column}` has zero variance")]
    ZeroVariance { group: String, column: String },

    #[error("rank-deficient regressors; linearly dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("group `{group}`: residual variance is zero (perfect fit)")]
    PerfectFit { group: String },

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        trajectory: Vec<Vec<f64>>,
    },

    #[error(
        "line search failed at iteration {iteration}: no ascent after {halvings} step halvings"
    )]
    LineSearch { iteration: usize, halvings: usize },

    #[error("could not draw a stable adjustment speed after {0} attempts")]
    ExplosiveDraw(usize),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised by the estimator itself rather than by bad input.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::PerfectFit { .. }
                | Error::NonConvergence { .. }
                | Error::LineSearch { .. }
                | Error::RankDeficient { .. }
                | Error::ZeroVariance { .. }
        )
    }
}
