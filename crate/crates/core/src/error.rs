use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty generator family")]
    EmptyFamily,

    #[error("index {index} out of range for ambient dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid sparsity model: {0}")]
    InvalidModel(String),

    #[error("enumeration budget exceeded: {count} supports, cap {cap}")]
    EnumerationBudget { count: u128, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("overflow guard tripped: linear predictor {value} exceeds {limit}")]
    Overflow { value: f64, limit: f64 },

    #[error("response {value} at row {row} is invalid for the {family} family")]
    InvalidResponse {
        row: usize,
        value: f64,
        family: &'static str,
    },

    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("model not identifiable from data: restricted curvature lower bound {beta} <= 1e-12")]
    NotIdentifiable { beta: f64 },

    #[error("flat curvature direction: quadratic form {0} <= 1e-12")]
    FlatCurvature(f64),

    #[error("reference point is infeasible: {0}")]
    InfeasibleReference(String),

    #[error("trace has no reference distances")]
    MissingReference,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures, as opposed to malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Overflow { .. }
                | Error::NotIdentifiable { .. }
                | Error::FlatCurvature(_)
                | Error::NotSymmetric { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyFamily => "empty_family",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidModel(_) => "invalid_model",
            Error::EnumerationBudget { .. } => "enumeration_budget",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::Overflow { .. } => "overflow",
            Error::InvalidResponse { .. } => "invalid_response",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NotIdentifiable { .. } => "not_identifiable",
            Error::FlatCurvature(_) => "flat_curvature",
            Error::InfeasibleReference(_) => "infeasible_reference",
            Error::MissingReference => "missing_reference",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
