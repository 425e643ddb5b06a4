//! Doubly robust corrections of a fitted `Q̂`.
//!
//! `V̂(x) = Σ_a π_e(a|x) Q̂(x,a)`, except that the absorbing state and the
//! state reached at the horizon both have `V̂ = 0`: nothing is collected
//! after step `T − 1`, and a nonzero bootstrap there would bias the
//! estimators by `γ^T E[V̂(x_T)]`.

pub mod magic;
pub mod simplex;

pub use magic::{magic, GVector, MagicConfig, MagicResult};
pub use simplex::{project_to_simplex, solve_simplex_qp, QpResult};

use crate::error::{OpeError, Result};
use crate::qtable::QTable;
use crate::weights::EvalContext;

/// Per-step correction terms `γ^t (r_t − Q̂(x_t,a_t) + γ V̂(x_{t+1}))` and the
/// start values `V̂(x_0)` of every trajectory.
pub(crate) struct Corrections {
    pub start: Vec<f64>,
    pub terms: Vec<Vec<f64>>,
}

impl Corrections {
    pub fn new(ctx: &EvalContext<'_>, q: &QTable) -> Result<Self> {
        let ds = ctx.dataset;
        if q.n_states() != ds.n_states() || q.n_actions() != ds.n_actions() {
            return Err(OpeError::InvalidInput("Q table shape does not match dataset".into()));
        }
        let mut v = q.state_values(ctx.pi_e);
        v[ds.absorbing_state()] = 0.0;
        let gamma = ctx.gamma;
        let start = ds.trajectories().iter().map(|t| v[t.states[0]]).collect();
        let terms = ds
            .trajectories()
            .iter()
            .map(|traj| {
                let t_max = traj.len();
                (0..t_max)
                    .map(|t| {
                        let next = if t + 1 < t_max { v[traj.states[t + 1]] } else { 0.0 };
                        let x = traj.states[t];
                        ctx.discounts[t] * (traj.rewards[t] - q.get(x, traj.actions[t]) + gamma * next)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { start, terms })
    }

    pub fn dm(&self) -> f64 {
        self.start.iter().sum::<f64>() / self.start.len() as f64
    }
}

pub fn dr(ctx: &EvalContext<'_>, q: &QTable) -> Result<f64> {
    let c = Corrections::new(ctx, q)?;
    let total: f64 =
        c.terms.iter().enumerate().map(|(i, u)| u.iter().enumerate().map(|(t, x)| ctx.rho.cum(i, t) * x).sum::<f64>()).sum();
    Ok(c.dm() + total / ctx.n() as f64)
}

/// DR with `ρ_{0:t}/N` replaced by `ρ_{0:t} / Σ_k ρ^k_{0:t}`.
pub fn wdr(ctx: &EvalContext<'_>, q: &QTable) -> Result<f64> {
    let c = Corrections::new(ctx, q)?;
    let norms = normalizers(ctx)?;
    let total: f64 = c
        .terms
        .iter()
        .enumerate()
        .map(|(i, u)| u.iter().enumerate().map(|(t, x)| (ctx.rho.cum(i, t) / norms[t]) * x).sum::<f64>())
        .sum();
    Ok(c.dm() + total)
}

pub(crate) fn normalizers(ctx: &EvalContext<'_>) -> Result<Vec<f64>> {
    let norms = ctx.rho.column_sums();
    match norms.iter().position(|w| *w <= 0.0) {
        Some(t) => Err(OpeError::DegenerateWeights(format!("Σ_i ρ_{{0:{t}}} is zero"))),
        None => Ok(norms),
    }
}
