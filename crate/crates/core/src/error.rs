use thiserror::Error;

/// Errors raised by the sewing toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SewingError {
    #[error("degenerate remainder: varpi({x}) = 0 at a positive grid point")]
    DegenerateRemainder { x: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("partition is not nested in {0}")]
    NotNested(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector field `{0}` does not provide a derivative")]
    MissingDerivative(String),
    #[error("p = {0} outside the admissible range [2, 3)")]
    RoughnessOutOfRange(f64),
    #[error("regularity budget violated: alpha * (1 + gamma) = {0} <= 1")]
    RegularityBudget(f64),
    #[error("index order violated: {0} > {1}")]
    IndexOrder(usize, usize),
    #[error("time {0} is not a node of the driver grid")]
    OffGrid(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("malformed specification `{0}`")]
    MalformedSpec(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SewingError {
    fn from(e: std::io::Error) -> Self {
        SewingError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SewingError>;
