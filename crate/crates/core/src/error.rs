use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigendecomposition did not converge")]
    DecompositionFailure,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: usize, found: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue} below -{tolerance})")]
    NotPositiveSemiDefinite { eigenvalue: f64, tolerance: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("tracial moments are unbounded; use the finite-n theta terms")]
    UnboundedMoments,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty input")]
    EmptyInput,

    #[error("parse error at row {row}, column `{column}`: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
