//! Approximate model: maximum-likelihood tables, evaluated by DP or rollouts.

use super::{AmEval, TransitionCounts};
use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::mdp::{MdpTables, TabularMdp};
use crate::policy::TabularPolicy;

/// Count-based model of the logged dynamics. Pairs never logged move to the
/// absorbing state with reward 0; the start distribution is the empirical one.
pub fn am_fit(dataset: &Dataset, gamma: f64) -> Result<TabularMdp> {
    if dataset.is_empty() {
        return Err(OpeError::EmptyDataset);
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());
    let abs = dataset.absorbing_state();
    let counts = TransitionCounts::from_dataset(dataset);
    let mut tables = MdpTables::empty(ns, na, abs, dataset.horizon(), gamma);

    let n = dataset.len() as f64;
    for traj in dataset.trajectories() {
        tables.initial_dist[traj.states[0]] += 1.0 / n;
    }
    for x in (0..ns).filter(|x| *x != abs) {
        for a in 0..na {
            let k = counts.key(x, a);
            let visits = counts.visits[k];
            if visits == 0 {
                tables.set(x, a, abs, 1.0, 0.0);
                continue;
            }
            for &(next, c, r_sum) in &counts.successors[k] {
                tables.set(x, a, next, c as f64 / visits as f64, r_sum / c as f64);
            }
        }
    }
    TabularMdp::new(tables)
}

pub fn am_value(model: &TabularMdp, pi_e: &TabularPolicy, eval: AmEval, seed: u64) -> Result<f64> {
    match eval {
        AmEval::Dp => model.exact_policy_value(pi_e),
        AmEval::Rollout(n) => Ok(model.monte_carlo_value(pi_e, n, seed)?.mean),
    }
}
