use thiserror::Error;

/// Errors raised by the analytic solvers and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("infeasible overload: {0}")]
    Infeasible(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("unstable network: {0}")]
    Stability(String),

    #[error("insufficient conditioning events: {hits} hits, at least {required} required")]
    InsufficientHits { hits: usize, required: usize },

    #[error("invalid descriptor `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
