//! The layered binary graph.
//!
//! States: `0` at depth 0, then `2d − 1` (odd) and `2d` (even) at depth `d`.
//! Action 0 heads for the odd successor, action 1 for the even one. The
//! even successor of depth `T − 1` coincides with the absorbing state `2T`;
//! the odd one (`2T − 1`) is terminal. Either way the episode is over after
//! `T` steps.

use crate::error::Result;
use crate::mdp::{MdpTables, RewardNoise, TabularMdp};

pub const SLIP_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub horizon: usize,
    /// Slip to the other successor with probability 0.25.
    pub stochastic_env: bool,
    pub stochastic_rewards: bool,
    /// Pay only on the last step, by the parity of `x_{T−1}`.
    pub sparse_rewards: bool,
}

impl GraphSpec {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, stochastic_env: false, stochastic_rewards: false, sparse_rewards: false }
    }

    pub fn n_states(&self) -> usize {
        2 * self.horizon + 1
    }

    pub fn absorbing_state(&self) -> usize {
        2 * self.horizon
    }
}

/// Depth of a non-absorbing graph state.
pub fn depth(state: usize) -> usize {
    state.div_ceil(2)
}

fn parity_reward(state: usize) -> f64 {
    if state % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_graph(spec: &GraphSpec, gamma: f64) -> Result<TabularMdp> {
    let t_max = spec.horizon;
    let ns = spec.n_states();
    let abs = spec.absorbing_state();
    let mut tables = MdpTables::empty(ns, 2, abs, t_max, gamma);
    if spec.stochastic_rewards {
        tables.reward_noise = RewardNoise::UnitGaussian;
    }
    tables.initial_dist[0] = 1.0;

    for s in 0..abs {
        let d = depth(s);
        if d >= t_max {
            tables.make_terminal(s);
            continue;
        }
        let odd = 2 * d + 1;
        let even = 2 * d + 2;
        let last_step = d + 1 == t_max;
        for a in 0..2 {
            let (intended, other) = if a == 0 { (odd, even) } else { (even, odd) };
            let outcomes: &[(usize, f64)] = if spec.stochastic_env {
                &[(intended, 1.0 - SLIP_PROBABILITY), (other, SLIP_PROBABILITY)]
            } else {
                &[(intended, 1.0)]
            };
            for &(next, p) in outcomes {
                let reward = match (spec.sparse_rewards, last_step) {
                    (false, _) => parity_reward(next),
                    (true, true) => parity_reward(s),
                    (true, false) => 0.0,
                };
                tables.add(s, a, next, p, reward);
            }
        }
    }
    TabularMdp::new(tables)
}
