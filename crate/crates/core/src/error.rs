use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid set parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("brute-force conjugacy check supports dimension <= 3, got {0}")]
    DimensionTooLarge(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("time grid needs T > 0 and at least 2 intervals")]
    InvalidGrid,
    #[error("strong Kalman check needs at least 2 inputs, got {0}")]
    TooFewInputs(usize),
    #[error("rank family test needs a nonempty basis")]
    EmptyBasis,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("constraint set dimension {set} does not match input count {inputs}")]
    SetDimension { set: usize, inputs: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(&'static str),
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("control reconstruction needs a converged dual solution, got {0}")]
    NotConverged(&'static str),
    #[error("dual solution has dimension {found}, problem has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("problem exceeds oracle scale limits: {0}")]
    ScaleLimit(String),
    #[error("closed-form HUM solution needs a Euclidean-ball constraint set")]
    NotEuclidean,
    #[error("discrete Gramian is numerically singular (condition number {0:.3e})")]
    SingularGramian(f64),
    #[error("deadline exceeded")]
    Deadline,
}
