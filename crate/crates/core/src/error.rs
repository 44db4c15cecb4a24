use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("assignment has {got} values but the formula has {expected} variables")]
    InvalidAssignment { expected: usize, got: usize },

    #[error("unsupported formula: {0}")]
    UnsupportedFormula(String),

    #[error("DIMACS parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("instance too large for exhaustive enumeration: {n} variables (cap {cap})")]
    InstanceTooLarge { n: usize, cap: usize },

    #[error("conditional distribution undefined: no satisfying assignment is consistent with the condition")]
    UndefinedConditional,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParameters(msg.into())
    }
}
