//! Estimators and goodness-of-fit machinery that turn simulation output into
//! pass/fail verdicts.

mod coalescence;
mod ks;
mod oracle;
mod power_law;
mod time_change;

use thiserror::Error;

use crate::error::EngineError;

pub use coalescence::{coalescence_scaling, median, BlowupConfig, CoalescencePoint};
pub use ks::{
    exp1_ks, kolmogorov_cdf, kolmogorov_quantile, ks_critical_value, ks_distance,
    ks_exact_cdf, Ecdf,
};
pub use oracle::{difference_walk_oracle, engine_connection_probability, Estimate};
pub use power_law::{fit_power_law, PowerLawFit};
pub use time_change::time_change_intervals;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("log times are not strictly increasing at entry {0}")]
    NonMonotoneLog(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
