use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("conflict set is empty for feature `{0}`")]
    EmptyConflictSet(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid feature assignment: {0}")]
    InvalidFeature(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("rows not unit norm: {0:?}")]
    NormError(Vec<usize>),
    #[error("degenerate spectral gap {0:e}")]
    DegenerateGap(f64),
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("invalid parameter: {0}")]
    ParamError(String),
    #[error("degenerate game: a == d, tau undefined")]
    DegenerateGame,
    #[error("enumeration of {0} outcomes exceeds the limit; use sampling")]
    EnumerationTooLarge(u128),
    #[error("matrix too large: {0}")]
    SizeError(String),
    #[error("matrix has a non-positive entry at ({0}, {1})")]
    NotPositive(usize, usize),
    #[error("slope fit failed: {0}")]
    FitError(String),
    #[error("standing condition violated: {0}")]
    ConditionViolated(String),
    #[error("step size {dt} exceeds stability limit {limit}")]
    StepSizeError { dt: f64, limit: f64 },
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    DivergenceError { epoch: usize, loss: f64 },
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that indicate a broken internal invariant rather than bad input.
    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::FitError(_) | Error::DivergenceError { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
