use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = OpeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OpeError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error(
        "behavior policy assigns zero probability to logged action {action} in state {state} \
         (trajectory {trajectory}, step {step})"
    )]
    SupportViolation {
        trajectory: usize,
        step: usize,
        state: usize,
        action: usize,
    },

    #[error("importance weights are degenerate: {0}")]
    DegenerateWeights(String),

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid gridworld layout: {0}")]
    InvalidLayout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trajectory enumeration exceeds the cap of {cap} trajectories")]
    EnumerationCap { cap: usize },

    #[error("trajectory enumeration requires deterministic rewards")]
    StochasticRewards,

    #[error("mean true value is zero; relative MSE is undefined")]
    ZeroMeanTruth,

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

/// Outcome of a single estimator evaluation, as recorded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The estimate is usable but an inner iteration hit its budget.
    NonConvergence,
    SupportViolation,
    DegenerateWeights,
    SolverError,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NonConvergence => "non_convergence",
            Status::SupportViolation => "support_violation",
            Status::DegenerateWeights => "degenerate_weights",
            Status::SolverError => "solver_error",
            Status::Failed => "failed",
        }
    }

    /// Whether the accompanying estimate may be used in aggregates.
    pub fn has_estimate(self) -> bool {
        matches!(self, Status::Ok | Status::NonConvergence)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => Status::Ok,
            "non_convergence" => Status::NonConvergence,
            "support_violation" => Status::SupportViolation,
            "degenerate_weights" => Status::DegenerateWeights,
            "solver_error" => Status::SolverError,
            "failed" => Status::Failed,
            _ => return None,
        })
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&OpeError> for Status {
    fn from(err: &OpeError) -> Self {
        match err {
            OpeError::SupportViolation { .. } => Status::SupportViolation,
            OpeError::DegenerateWeights(_) => Status::DegenerateWeights,
            OpeError::NonConvergence { .. } => Status::NonConvergence,
            OpeError::Solver(_) => Status::SolverError,
            _ => Status::Failed,
        }
    }
}
