use thiserror::Error;

/// Case-file parse and validation failures.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("reference to unknown bus {0}")]
    UnknownBus(u32),
    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("branch {0}-{0} is a self-loop")]
    SelfLoop(u32),
    #[error("network graph is disconnected or has no branches")]
    Disconnected,
    #[error("branch {branch}: {field} must be positive, got {value}")]
    NonPositive {
        branch: usize,
        field: &'static str,
        value: f64,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Failures of the simplex solver itself, as opposed to infeasible or unbounded models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("simplex iteration limit ({0}) exceeded")]
    IterationLimit(usize),
    #[error("basis matrix is numerically singular after refactorization")]
    SingularBasis,
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("internal consistency check failed: {0}")]
    Invariant(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u64, expected: u64 },
    #[error("invalid file: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
