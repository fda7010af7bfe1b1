use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A control observation equals a treated observation. The statistic and
    /// every moment formula assume continuous (tie-free) data, so ties are a
    /// hard error rather than a half-count.
    #[error("tie between a control and a treated observation (continuity violated)")]
    Tie,

    /// Not enough observations for the requested estimator.
    #[error("insufficient data: need at least {needed} observations per group, got ({got_x}, {got_y})")]
    InsufficientData { needed: usize, got_x: usize, got_y: usize },

    /// A parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Zero variance where a positive variance is required.
    #[error("degenerate distribution: variance is zero")]
    Degenerate,

    /// The exact enumeration would exceed the configured arrangement budget.
    #[error("enumeration budget exceeded: C(M+N, M) = {required} > budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    /// No critical value pair can meet the size constraints.
    #[error("no feasible critical values for the requested alpha levels")]
    InfeasibleAlpha,

    /// Malformed design: stage-1 sizes must sit inside the totals.
    #[error("invalid design: {0}")]
    InvalidDesign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
