use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A ratio was evaluated outside `(0, 1/p)`, where the KL constraint is undefined.
    #[error("ratio {x} is outside the domain (0, {limit}) of the KL constraint at p = {p}")]
    Domain { p: f64, x: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Iteration cap hit; carries the last bracket so callers can inspect it.
    #[error("solver did not converge in {iterations} iterations (last bracket [{lo}, {hi}], residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("exact enumeration needs {needed} branches but the budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("batch has no positive- or negative-advantage samples to scale the KL budget against")]
    EmptyBatch,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("bad table file: {0}")]
    TableFormat(String),

    #[error("bad config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
