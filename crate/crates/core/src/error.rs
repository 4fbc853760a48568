use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value iteration did not converge after {iterations} sweeps (worst state {state}, residual {residual:e})")]
    Divergence {
        state: usize,
        iterations: u64,
        residual: f64,
    },

    #[error("extended value iteration did not contract within {sweeps} sweeps (stuck at state {state})")]
    NonContraction { state: usize, sweeps: u64 },

    #[error("policy is improper: state {state} never reaches the goal")]
    ImproperPolicy { state: usize },

    #[error("moment order {0} is not supported (1..=20)")]
    UnsupportedOrder(u32),

    #[error("confidence mode {0} has no L1 radius")]
    WrongMode(&'static str),

    #[error("per-element confidence box is infeasible: upper bounds sum to {0}")]
    Infeasible(f64),

    #[error("observed cost {cost} outside the declared range [{c_min}, {c_max}]")]
    CostOutOfRange { cost: f64, c_min: f64, c_max: f64 },

    #[error("environment stepped while at the goal")]
    StepAtGoal,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
