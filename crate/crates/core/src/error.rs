use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension {dim} unsupported (maximum {max})")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("problem size {n} exceeds the hard limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("column {column} is constant")]
    ConstantColumn { column: usize },

    #[error("statistic returned a non-finite value on replicate {replicate}")]
    NonFiniteStatistic { replicate: u64 },

    #[error("replicate index {replicate} already used in this experiment")]
    StreamCollision { replicate: u64 },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::NonFiniteStatistic { .. })
    }
}

pub type Result<T> = core::result::Result<T, Error>;
