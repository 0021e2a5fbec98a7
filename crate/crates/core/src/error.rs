use thiserror::Error;

/// Errors raised by the analysis engine.
///
/// Model faults (a failing zero check, no exact partition, a metric mismatch)
/// are findings and are reported through result types, not through this enum.
/// The one exception is [`Error::ZeroCheckFailed`], raised when an exact
/// search is requested on a statement that does not add up.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column {col}: {message}")]
    Cell { row: usize, col: usize, message: String },

    #[error("malformed cell {text:?}: {reason}")]
    CellSyntax { text: String, reason: &'static str },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("table: {0}")]
    Table(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("no row matches reference {0:?}")]
    UnknownRow(String),

    #[error("reference {reference:?} is ambiguous ({matches} rows match); qualify it as heading/label or append #n")]
    AmbiguousRow { reference: String, matches: usize },

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("statement does not add up (max residual {max_residual} exceeds tolerance {tolerance})")]
    ZeroCheckFailed { max_residual: f64, tolerance: f64 },

    #[error("rate must exceed -1, got {0}")]
    RateOutOfDomain(f64),

    #[error("cash flows have no sign change; IRR is undefined")]
    UndefinedIrr,

    #[error("no IRR root found in (-0.999999, 1e6)")]
    IrrNoConvergence,

    #[error("ratio denominator is zero")]
    ZeroDenominator,

    #[error("search space too large: {rows} rows with {states} states each")]
    SearchTooLarge { rows: usize, states: usize },

    #[error("decomposition of {parent}: {reason}")]
    Decomposition { parent: String, reason: String },

    #[error("not applicable: {0}")]
    Unsupported(String),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
