use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible selection: {0}")]
    InfeasibleSelection(String),

    #[error("empty segment: i1={i1} > i2={i2}")]
    EmptySegment { i1: usize, i2: usize },

    #[error("size guard exceeded: {actual} > {guard} ({what})")]
    SizeGuard {
        what: String,
        actual: usize,
        guard: usize,
    },

    #[error("malformed bit stream: {0}")]
    Decode(String),

    #[error("codec adapter: {0}")]
    Codec(String),

    #[error("unknown check: {0}")]
    UnknownCheck(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
