use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("term budget of {budget} exceeded before the tail certificate fired")]
    TermBudgetExceeded { budget: usize },

    #[error("regime out of range: {0}")]
    RegimeOutOfRange(String),

    #[error("cancellation ratio {ratio:.3e} exceeds the limit of {limit:.0e}")]
    CancellationLoss { ratio: f64, limit: f64 },

    #[error("Poisson series decays too slowly at t = {t} (k = {k})")]
    SlowConvergence { k: u64, t: f64 },

    #[error("two-term model is not convex: second difference {0:.3e}")]
    ConvexityViolation(f64),

    #[error("required assumptions do not hold: {0}")]
    InapplicableAssumptions(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
