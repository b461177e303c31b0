use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension {dim} is not supported (supported: {supported})")]
    UnsupportedDimension { dim: usize, supported: &'static str },

    #[error("point index {index} does not fit the 32-bit digit expansion")]
    IndexRange { index: u64 },

    #[error("randomization not supported: {0}")]
    UnsupportedRandomization(&'static str),

    #[error("{what}: size {got} exceeds the limit of {limit}")]
    SizeLimit { what: &'static str, got: usize, limit: usize },

    #[error("point {index} lies on the boundary of the unit cube")]
    BoundaryPoint { index: usize },

    #[error("point {index} maps to a zero vector")]
    DegeneratePoint { index: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
