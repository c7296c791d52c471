use thiserror::Error;

use crate::magnitude::SpectrumDiagnostics;
use crate::metric::ValidationReport;

pub type Result<T, E = MagError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MagError {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquareMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("non-finite distance entry at ({0}, {1})")]
    NonFiniteEntry(usize, usize),
    #[error("empty metric space")]
    EmptySpace,
    #[error("matrix fails the metric axioms (worst triangle violation {}, worst asymmetry {})",
        .0.worst_triangle_violation, .0.worst_asymmetry)]
    InvalidMetric(Box<ValidationReport>),
    #[error("unsupported family for this operation: {0}")]
    UnsupportedFamily(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("scale must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(String),
    #[error("subset is empty")]
    EmptySubset,
    #[error("index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("symmetric eigensolver did not converge after {iterations} iterations")]
    EigensolverFailure { iterations: usize },
    #[error("similarity matrix is not positive definite (lambda_min = {:e}, tolerance {:e})",
        .0.lambda_min, .0.tolerance_used)]
    NotPositiveDefinite(Box<SpectrumDiagnostics>),
    #[error("similarity matrix is indefinite (lambda_min = {:e}); the diversity problem is not convex",
        .0.lambda_min)]
    IndefiniteForm(Box<SpectrumDiagnostics>),
    #[error("quadratic form is degenerate for this vector (value {value:e})")]
    DegenerateQuadraticForm { value: f64 },
    #[error("weighting sign test and diversity cross-check disagree: {0}")]
    Inconsistent(String),
    #[error("need at least {needed} records inside the window, found {found}")]
    InsufficientRecords { needed: usize, found: usize },
    #[error("quadrature tail estimate {tail:e} exceeds tolerance {tolerance:e}; increase the cutoff")]
    QuadratureDivergence { tail: f64, tolerance: f64 },
    #[error("no positive ratio on the frequency grid")]
    NegativeRatioOnly,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
