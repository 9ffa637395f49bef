use thiserror::Error;

/// Failure of a single objective evaluation.
///
/// `BudgetExhausted` is the normal way a run learns that it has to stop; the
/// optimizers turn it into a clean termination rather than a failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("evaluation budget exhausted")]
    BudgetExhausted,
    #[error("numeric domain error: {0}")]
    Numeric(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("empty slice: {0}")]
    EmptySlice(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
