use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a structural precondition (empty, non-finite, out of range).
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// A metric-space audit (symmetry, triangle inequality, normalization) failed.
    #[error("metric audit failed: {0}")]
    MetricAudit(String),

    /// The field (or the norm of a derived quantity) is degenerate and the
    /// requested construction is undefined for it.
    #[error("degenerate field: {0}")]
    DegenerateField(String),

    /// A stated precondition of a bound does not hold for the supplied data.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numeric search did not converge within its iteration cap.
    #[error("numeric search failed: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateField(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
