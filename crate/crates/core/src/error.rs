use alloc::string::String;

/// Errors raised by constructions in this crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid graph of groups: {0}")]
    InvalidGraph(String),
    #[error("malformed word: {0}")]
    MalformedWord(String),
    #[error("action is not free: {0}")]
    NotFree(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("homomorphism is not surjective")]
    NotSurjective,
    #[error("generator reduces to the identity")]
    TrivialGenerator,
    #[error("word has nontrivial retraction")]
    NotInKernel,
    #[error("supplied retraction fails the relation check: {0}")]
    NotRetractive(String),
    #[error("empty set")]
    EmptySet,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("{what} exceeded budget of {limit}")]
    BudgetExceeded { what: &'static str, limit: usize },
    #[error("ball enumeration exceeds cap of {0}")]
    BallTooLarge(usize),
    #[error("{0}")]
    Precondition(String),
}

impl Error {
    pub fn budget(what: &'static str, limit: usize) -> Self {
        Error::BudgetExceeded { what, limit }
    }

    /// Budget-type failures map to a distinct CLI exit code.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. } | Error::BallTooLarge(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
