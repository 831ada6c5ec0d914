use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid space layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("factor index {index} out of range for a layout with {len} factors")]
    FactorOutOfRange { index: usize, len: usize },

    #[error("partial trace needs at least one kept factor")]
    EmptyKeep,

    #[error("operands live on different space layouts")]
    LayoutMismatch,

    #[error("mode list is empty")]
    EmptyModes,

    #[error("total dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operator is not Hermitian (relative defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("eigendecomposition failed: {0}")]
    Eigendecomposition(String),

    #[error("model has no center-of-mass factors to check")]
    MissingPartition,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
