//! Direct methods: fit `Q̂` (or a model, or a state-density ratio) from data.

pub mod am;
pub mod fqe;
pub mod ih;
pub mod lambda;
pub mod mrdr;
pub mod qreg;

pub use am::{am_fit, am_value};
pub use fqe::fqe;
pub use ih::{ih_estimate, ih_fit};
pub use lambda::{lambda_backup, LambdaVariant};
pub use mrdr::{mrdr, mrdr_objective};
pub use qreg::q_reg;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::qtable::QTable;

/// How AM turns its learned model into a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmEval {
    #[default]
    Dp,
    /// Average of this many rollouts in the learned model.
    Rollout(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectConfig {
    pub fqe_eps: f64,
    pub max_iter: usize,
    pub lambda: f64,
    /// Ridge weight for Q-Reg and MRDR.
    pub reg_omega: f64,
    pub ih_reg: f64,
    pub am_eval: AmEval,
    /// Use `(ρ_{0:t-1})²` instead of `(ρ_{0:T-1})²` in the MRDR weight.
    pub mrdr_per_decision: bool,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            fqe_eps: 1e-5,
            max_iter: 500,
            lambda: 0.9,
            reg_omega: 1.0,
            ih_reg: 1e-3,
            am_eval: AmEval::Dp,
            mrdr_per_decision: false,
        }
    }
}

impl DirectConfig {
    /// Table defaults for the gridworld.
    pub fn gridworld() -> Self {
        Self { fqe_eps: 4e-4, max_iter: 50, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OpeError::InvalidConfig(m.into()));
        if !(self.fqe_eps > 0.0) {
            return bad("fqe_eps must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.reg_omega >= 0.0 && self.ih_reg >= 0.0) {
            return bad("regularizers must be non-negative");
        }
        if self.am_eval == AmEval::Rollout(0) {
            return bad("AM rollout count must be positive");
        }
        Ok(())
    }
}

/// A fitted `Q̂` with the diagnostics of the procedure that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QFit {
    pub q: QTable,
    pub iterations: usize,
    /// Last max-abs change (0 for closed-form fits).
    pub residual: f64,
    pub converged: bool,
}

impl QFit {
    pub(crate) fn closed_form(q: QTable) -> Self {
        Self { q, iterations: 1, residual: 0.0, converged: true }
    }
}

/// Empirical one-step model of the logged `(x, a)` pairs: mean reward and
/// successor frequencies. Used by FQE and AM.
pub(crate) struct TransitionCounts {
    pub n_actions: usize,
    pub visits: Vec<usize>,
    pub reward_sum: Vec<f64>,
    /// `(next_state, count, reward_sum)` per logged successor.
    pub successors: Vec<Vec<(usize, usize, f64)>>,
}

impl TransitionCounts {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let (ns, na) = (dataset.n_states(), dataset.n_actions());
        let abs = dataset.absorbing_state();
        let mut visits = vec![0; ns * na];
        let mut reward_sum = vec![0.0; ns * na];
        let mut successors: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); ns * na];
        for traj in dataset.trajectories() {
            for t in 0..traj.len() {
                let x = traj.states[t];
                if x == abs {
                    continue;
                }
                let k = x * na + traj.actions[t];
                visits[k] += 1;
                reward_sum[k] += traj.rewards[t];
                let (next, r) = (traj.states[t + 1], traj.rewards[t]);
                match successors[k].iter_mut().find(|(s, _, _)| *s == next) {
                    Some(entry) => {
                        entry.1 += 1;
                        entry.2 += r;
                    }
                    None => successors[k].push((next, 1, r)),
                }
            }
        }
        Self { n_actions: na, visits, reward_sum, successors }
    }

    #[inline]
    pub fn key(&self, x: usize, a: usize) -> usize {
        x * self.n_actions + a
    }
}

pub(crate) fn check_finite(q: &QTable, method: &str) -> Result<()> {
    if q.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OpeError::Solver(format!("{method} produced non-finite values")))
    }
}
