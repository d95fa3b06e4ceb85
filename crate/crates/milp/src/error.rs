use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid identifier `{0}`")]
    InvalidName(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint `{0}`")]
    DuplicateConstraint(String),
    #[error("constraint `{row}` references undeclared variable #{index}")]
    UnknownVariable { row: String, index: usize },
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("integer variable `{0}` must have finite bounds")]
    UnboundedInteger(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("constraint `{0}` has no non-zero coefficients")]
    EmptyConstraint(String),
}

#[derive(Debug, Error)]
pub enum LpFormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no solver backend configured")]
    NoBackend,
    #[error("backend `{0}` is not available in this build")]
    Unavailable(String),
    #[error("value missing for variable `{0}`")]
    MissingValue(String),
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("malformed solution file: {0}")]
    SolutionFormat(String),
    #[error(transparent)]
    Lp(#[from] LpFormatError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
