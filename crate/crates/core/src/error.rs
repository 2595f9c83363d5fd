use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("kernel is not positive definite (relative minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("operator covariance kernels differ (relative residual {residual:.3e})")]
    KernelMismatch { residual: f64 },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("test function support lies entirely off the grid")]
    OffGrid,

    #[error("test function is outside the representable span (residual {residual:.3e})")]
    NotRepresentable { residual: f64 },

    #[error("exhaustive search over {size} atoms exceeds the limit of {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
