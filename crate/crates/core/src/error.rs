use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid constraint set: {0}")]
    InvalidSet(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("point is infeasible: {0}")]
    Infeasible(String),
    #[error("shrunk domain is empty: {0}")]
    InfeasibleShrink(String),
    #[error("point outside oracle domain: {0}")]
    Domain(String),
    #[error("capability not advertised: {0}")]
    Capability(&'static str),
    #[error("wrong problem mode: {0}")]
    Mode(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure at iteration {iteration}: {what}")]
    NumericalFailure { iteration: usize, what: String },
    #[error("replica divergence at round {0}")]
    ReplicaDivergence(usize),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}
