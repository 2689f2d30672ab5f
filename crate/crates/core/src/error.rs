use thiserror::Error;

use crate::forms::Bidegree;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("bidegree mismatch: expected {expected}, found {found}")]
    BidegreeMismatch { expected: Bidegree, found: Bidegree },

    #[error("unsupported complex dimension {0}")]
    UnsupportedDimension(usize),

    #[error("form is not real (defect {0:e})")]
    NotReal(f64),

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    /// The (1,1)-part stopped being a metric somewhere on the grid.
    #[error("positivity lost (margin {margin:e}{})", node.map(|i| format!(" at node {i}")).unwrap_or_default())]
    PositivityLost { margin: f64, node: Option<usize> },

    #[error("constraint violated at t = {t}: residual {residual:e} exceeds {tolerance:e}")]
    ConstraintViolation { t: f64, residual: f64, tolerance: f64 },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
