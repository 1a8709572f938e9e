use crate::solver::SolverTrace;

/// Errors surfaced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("block {block}: subproblem solve stopped after {iters} iterations with residual {residual:.3e}")]
    ConvergenceFailure {
        block: usize,
        iters: usize,
        residual: f64,
    },

    /// Non-finite objective or iterate. Carries the trace accumulated up to
    /// the failing iteration.
    #[error("numerical failure at iteration {iter}: {what}")]
    NumericalFailure {
        iter: u64,
        what: String,
        trace: Box<SolverTrace>,
    },

    #[error("h_star inconsistent with trace: objective undershoots it by {gap:.3e} at iteration {iter}")]
    InconsistentHStar { iter: u64, gap: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        CoreError::Unsupported(msg.into())
    }
}
