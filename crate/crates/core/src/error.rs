use thiserror::Error;

/// Errors raised by problem construction, the QP subsolver and the LCQP solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: String,
        found: String,
    },

    #[error("hessian `Q` is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NonSymmetricHessian { row: usize, col: usize, diff: f64 },

    #[error("hessian `Q` is not positive definite")]
    IndefiniteHessian,

    #[error("non-finite entry in `{field}`")]
    NonFinite { field: String },

    #[error("bounds inconsistent at index {index}: lb = {lb}, ub = {ub}")]
    InvalidBounds { index: usize, lb: f64, ub: f64 },

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("QP is infeasible: the constraint polyhedron is empty")]
    InfeasibleQp,

    #[error("iteration limit of {limit} reached")]
    IterationLimit { limit: usize },

    #[error("point is not feasible for the LCQP: {reason}")]
    NotFeasible { reason: String },

    #[error("all complementarity branches are infeasible")]
    AllBranchesInfeasible,

    #[error("oracle supports at most {cap} complementarity pairs, problem has {n_c}")]
    OracleCapExceeded { n_c: usize, cap: usize },

    #[error("index map does not match solution: map expects n = {expected}, solution has {found}")]
    IndexMapMismatch { expected: usize, found: usize },

    #[error("invalid option `{name}`: {reason}")]
    InvalidOption { name: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(field: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            field: field.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn parse(field: &str, message: impl ToString) -> Self {
        Error::Parse {
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}
