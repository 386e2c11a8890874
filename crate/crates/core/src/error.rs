use thiserror::Error;

/// Errors raised by the library.
///
/// The variants split along the CLI exit-code taxonomy: [`Error::Input`] is a
/// malformed document or argument, [`Error::Precondition`] a well-formed
/// request that a solver or kernel cannot honour.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("degenerate domain")]
    DegenerateDomain,
    #[error("empty measure")]
    EmptyMeasure,
    #[error("gradient singular at demand point")]
    SingularGradient,
    #[error("budget mismatch: {0} vs {1}")]
    BudgetMismatch(f64, f64),
    #[error("probabilities must sum to 1 (got {0})")]
    ProbabilitySum(f64),
    #[error("budget must be positive (got {0})")]
    NonPositiveBudget(f64),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scenario schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
