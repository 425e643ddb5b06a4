//! Finite-horizon tabular MDPs and exact evaluation oracles.
//!
//! Transition and reward tables are indexed by `(state, action, next_state)`.
//! Episodes have a fixed horizon `T`; a terminal state moves to the absorbing
//! state with reward 0 under every action, so trajectories that end early are
//! padded by the dynamics themselves.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Trajectory;
use crate::error::{OpeError, Result};
use crate::policy::TabularPolicy;
use crate::qtable::QTable;
use crate::rng::{self, sample_index};

const SUM_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardNoise {
    #[default]
    None,
    /// `N(0, 1)` noise on every transition whose mean reward is non-zero.
    UnitGaussian,
}

#[derive(Debug, Clone)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_noise: RewardNoise,
    terminal: Vec<bool>,
    absorbing_state: usize,
    initial_dist: Vec<f64>,
    horizon: usize,
    gamma: f64,
    // non-zero successors per (state, action)
    support: Vec<Vec<(usize, f64)>>,
}

/// Raw tables for [`TabularMdp::new`].
#[derive(Debug, Clone)]
pub struct MdpTables {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<f64>,
    pub reward_mean: Vec<f64>,
    pub reward_noise: RewardNoise,
    pub terminal: Vec<bool>,
    pub absorbing_state: usize,
    pub initial_dist: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
}

impl MdpTables {
    /// Zeroed tables whose absorbing state already self-loops.
    pub fn empty(n_states: usize, n_actions: usize, absorbing_state: usize, horizon: usize, gamma: f64) -> Self {
        let mut tables = Self {
            n_states,
            n_actions,
            transition: vec![0.0; n_states * n_actions * n_states],
            reward_mean: vec![0.0; n_states * n_actions * n_states],
            reward_noise: RewardNoise::None,
            terminal: vec![false; n_states],
            absorbing_state,
            initial_dist: vec![0.0; n_states],
            horizon,
            gamma,
        };
        if absorbing_state < n_states {
            tables.make_terminal(absorbing_state);
        }
        tables
    }

    #[inline]
    pub fn idx(&self, s: usize, a: usize, s2: usize) -> usize {
        (s * self.n_actions + a) * self.n_states + s2
    }

    pub fn set(&mut self, s: usize, a: usize, s2: usize, prob: f64, reward: f64) {
        let i = self.idx(s, a, s2);
        self.transition[i] = prob;
        self.reward_mean[i] = reward;
    }

    pub fn add(&mut self, s: usize, a: usize, s2: usize, prob: f64, reward: f64) {
        let i = self.idx(s, a, s2);
        self.transition[i] += prob;
        self.reward_mean[i] = reward;
    }

    /// Marks `s` terminal and routes every action to the absorbing state with reward 0.
    pub fn make_terminal(&mut self, s: usize) {
        self.terminal[s] = true;
        for a in 0..self.n_actions {
            for s2 in 0..self.n_states {
                let i = self.idx(s, a, s2);
                self.transition[i] = if s2 == self.absorbing_state { 1.0 } else { 0.0 };
                self.reward_mean[i] = 0.0;
            }
        }
    }
}

impl TabularMdp {
    pub fn new(t: MdpTables) -> Result<Self> {
        let (ns, na) = (t.n_states, t.n_actions);
        let bad = |msg: String| Err(OpeError::InvalidMdp(msg));
        if ns == 0 || na == 0 {
            return bad("needs at least one state and one action".into());
        }
        if t.transition.len() != ns * na * ns || t.reward_mean.len() != ns * na * ns {
            return bad("transition/reward tables have the wrong size".into());
        }
        if t.terminal.len() != ns || t.initial_dist.len() != ns {
            return bad("terminal/initial tables have the wrong size".into());
        }
        if t.absorbing_state >= ns {
            return bad(format!("absorbing state {} out of range", t.absorbing_state));
        }
        if !(t.gamma > 0.0 && t.gamma <= 1.0) {
            return bad(format!("gamma = {} is not in (0, 1]", t.gamma));
        }
        if t.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if t.reward_mean.iter().any(|r| !r.is_finite()) {
            return bad("non-finite reward".into());
        }
        let mut support = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let row = &t.transition[(s * na + a) * ns..(s * na + a + 1) * ns];
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad(format!("negative transition probability at ({s}, {a})"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return bad(format!("transition row ({s}, {a}) sums to {sum}"));
                }
                support.push(row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, p)| (i, *p)).collect());
            }
        }
        let init_sum: f64 = t.initial_dist.iter().sum();
        if t.initial_dist.iter().any(|p| *p < 0.0) || (init_sum - 1.0).abs() > SUM_TOLERANCE {
            return bad(format!("initial distribution sums to {init_sum}"));
        }
        let abs = t.absorbing_state;
        if !t.terminal[abs] {
            return bad("absorbing state must be terminal".into());
        }
        for s in (0..ns).filter(|s| t.terminal[*s]) {
            for a in 0..na {
                let i = (s * na + a) * ns + abs;
                if t.transition[i] != 1.0 || t.reward_mean[i] != 0.0 {
                    return bad(format!("terminal state {s} must move to the absorbing state with reward 0"));
                }
            }
        }
        Ok(Self {
            n_states: ns,
            n_actions: na,
            transition: t.transition,
            reward_mean: t.reward_mean,
            reward_noise: t.reward_noise,
            terminal: t.terminal,
            absorbing_state: abs,
            initial_dist: t.initial_dist,
            horizon: t.horizon,
            gamma: t.gamma,
            support,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn absorbing_state(&self) -> usize {
        self.absorbing_state
    }
    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }
    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s2]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.reward_mean[(s * self.n_actions + a) * self.n_states + s2]
    }

    /// Successors of `(s, a)` with positive probability.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.support[s * self.n_actions + a]
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut t = self.tables();
        t.gamma = gamma;
        Self::new(t)
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut t = self.tables();
        t.horizon = horizon;
        Self::new(t)
    }

    pub fn tables(&self) -> MdpTables {
        MdpTables {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transition: self.transition.clone(),
            reward_mean: self.reward_mean.clone(),
            reward_noise: self.reward_noise,
            terminal: self.terminal.clone(),
            absorbing_state: self.absorbing_state,
            initial_dist: self.initial_dist.clone(),
            horizon: self.horizon,
            gamma: self.gamma,
        }
    }

    fn check_policy(&self, pi: &TabularPolicy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(OpeError::InvalidPolicy(format!(
                "policy is {}×{}, MDP is {}×{}",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn sample_initial<R: Rng>(&self, rng: &mut R) -> usize {
        sample_index(self.initial_dist.iter().copied().enumerate(), rng.random())
    }

    /// One environment step; returns `(next_state, reward)`.
    pub(crate) fn sample_step<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64) {
        let next = sample_index(self.successors(s, a).iter().copied(), rng.random());
        let mean = self.reward(s, a, next);
        let reward = match self.reward_noise {
            RewardNoise::UnitGaussian if mean != 0.0 => mean + rng.sample::<f64, _>(StandardNormal),
            _ => mean,
        };
        (next, reward)
    }

    /// Samples a full `T`-step trajectory under `pi`.
    pub(crate) fn rollout<R: Rng>(&self, pi: &TabularPolicy, rng: &mut R) -> Trajectory {
        let t_max = self.horizon;
        let mut states = Vec::with_capacity(t_max + 1);
        let mut actions = Vec::with_capacity(t_max);
        let mut rewards = Vec::with_capacity(t_max);
        let mut s = self.sample_initial(rng);
        states.push(s);
        for _ in 0..t_max {
            let a = sample_index(pi.row(s).iter().copied().enumerate(), rng.random());
            let (next, r) = self.sample_step(s, a, rng);
            actions.push(a);
            rewards.push(r);
            states.push(next);
            s = next;
        }
        Trajectory { states, actions, rewards }
    }

    /// Finite-horizon `Q^π` with `T` steps to go, by backward induction on the
    /// mean reward table. For MDPs whose states encode the time step (the graph
    /// family) this is also the stationary Bellman fixed point.
    pub fn policy_q_values(&self, pi: &TabularPolicy) -> Result<QTable> {
        self.check_policy(pi)?;
        Ok(self.backward_induction(|q, s| q.state_value(pi, s)))
    }

    /// Finite-horizon optimal `Q*` (value iteration over exactly `T` sweeps).
    pub fn optimal_q_values(&self) -> QTable {
        self.backward_induction(|q, s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    fn backward_induction(&self, state_value: impl Fn(&QTable, usize) -> f64) -> QTable {
        let (ns, na) = (self.n_states, self.n_actions);
        let mut q = QTable::zeros(ns, na);
        let mut v = vec![0.0; ns];
        for _ in 0..self.horizon {
            let mut next_q = QTable::zeros(ns, na);
            for s in 0..ns {
                for a in 0..na {
                    let backup: f64 = self
                        .successors(s, a)
                        .iter()
                        .map(|&(s2, p)| p * (self.reward(s, a, s2) + self.gamma * v[s2]))
                        .sum();
                    next_q.set(s, a, backup);
                }
            }
            q = next_q;
            for (s, vs) in v.iter_mut().enumerate() {
                *vs = state_value(&q, s);
            }
        }
        q
    }

    /// `V(π) = Σ_x d_0(x) V_0(x)` over exactly `T` steps.
    pub fn exact_policy_value(&self, pi: &TabularPolicy) -> Result<f64> {
        let q = self.policy_q_values(pi)?;
        Ok(self.initial_dist.iter().enumerate().map(|(s, d)| d * q.state_value(pi, s)).sum())
    }

    /// Sample mean of discounted returns over `n_rollouts` independent episodes.
    pub fn monte_carlo_value(&self, pi: &TabularPolicy, n_rollouts: usize, seed: u64) -> Result<MonteCarloValue> {
        self.check_policy(pi)?;
        if n_rollouts == 0 {
            return Err(OpeError::InvalidInput("monte_carlo_value needs at least one rollout".into()));
        }
        let discounts = discounts(self.gamma, self.horizon);
        let returns: Vec<f64> = (0..n_rollouts as u64)
            .map(|i| {
                let mut rng = rng::stream(seed, rng::ROLLOUT_STREAM_BASE + i);
                self.rollout(pi, &mut rng).discounted_return(&discounts)
            })
            .collect();
        Ok(MonteCarloValue::from_samples(&returns))
    }

    /// Every trajectory reachable under `pi` with its probability.
    pub fn enumerate_trajectories(&self, pi: &TabularPolicy, cap: usize) -> Result<Vec<(Trajectory, f64)>> {
        self.check_policy(pi)?;
        if self.reward_noise != RewardNoise::None {
            return Err(OpeError::StochasticRewards);
        }
        let mut out = Vec::new();
        for (s0, &p0) in self.initial_dist.iter().enumerate() {
            if p0 > 0.0 {
                let mut prefix = Trajectory { states: vec![s0], actions: vec![], rewards: vec![] };
                self.enumerate_from(pi, &mut prefix, p0, cap, &mut out)?;
            }
        }
        Ok(out)
    }

    fn enumerate_from(
        &self,
        pi: &TabularPolicy,
        prefix: &mut Trajectory,
        prob: f64,
        cap: usize,
        out: &mut Vec<(Trajectory, f64)>,
    ) -> Result<()> {
        if prefix.actions.len() == self.horizon {
            if out.len() == cap {
                return Err(OpeError::EnumerationCap { cap });
            }
            out.push((prefix.clone(), prob));
            return Ok(());
        }
        let s = *prefix.states.last().expect("prefix has a start state");
        for a in 0..self.n_actions {
            let pa = pi.prob(s, a);
            if pa <= 0.0 {
                continue;
            }
            for &(s2, ps) in self.successors(s, a) {
                prefix.states.push(s2);
                prefix.actions.push(a);
                prefix.rewards.push(self.reward(s, a, s2));
                self.enumerate_from(pi, prefix, prob * pa * ps, cap, out)?;
                prefix.states.pop();
                prefix.actions.pop();
                prefix.rewards.pop();
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloValue {
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub n: usize,
}

impl MonteCarloValue {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, std_error: (var / n as f64).sqrt(), n }
    }
}

/// `[γ^0, γ^1, …, γ^T]`.
pub fn discounts(gamma: f64, horizon: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut g = 1.0;
    for _ in 0..=horizon {
        out.push(g);
        g *= gamma;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_chain() -> TabularMdp {
        // state 0 --a0--> 1 (r=1) ; state 0 --a1--> 0 (r=0.5); state 1 terminal; 2 absorbing
        let mut t = MdpTables::empty(3, 2, 2, 3, 0.9);
        t.set(0, 0, 1, 1.0, 1.0);
        t.set(0, 1, 0, 1.0, 0.5);
        t.make_terminal(1);
        t.initial_dist[0] = 1.0;
        TabularMdp::new(t).unwrap()
    }

    #[test]
    fn validation_catches_bad_rows_and_terminals() {
        let mut t = MdpTables::empty(2, 1, 1, 1, 1.0);
        t.initial_dist[0] = 1.0;
        assert!(TabularMdp::new(t.clone()).is_err(), "state 0 row sums to 0");
        t.set(0, 0, 1, 1.0, 1.0);
        assert!(TabularMdp::new(t.clone()).is_ok());
        let mut bad_abs = t.clone();
        let i = bad_abs.idx(1, 0, 1);
        bad_abs.reward_mean[i] = 1.0;
        assert!(TabularMdp::new(bad_abs).is_err());
        let mut bad_gamma = t;
        bad_gamma.gamma = 0.0;
        assert!(TabularMdp::new(bad_gamma).is_err());
    }

    #[test]
    fn backward_induction_matches_hand_computation() {
        let mdp = two_state_chain();
        // Horizon 3, γ = 0.9. Q*(0,a0) = 1, Q*(0,a1) = 0.5 + 0.9·max over two steps to go.
        // 2 steps to go: Q(0,a0)=1, Q(0,a1)=0.5+0.9·1=1.4 → V=1.4
        // 3 steps to go: Q(0,a0)=1, Q(0,a1)=0.5+0.9·1.4=1.76
        let q = mdp.optimal_q_values();
        assert!((q.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((q.get(0, 1) - 1.76).abs() < 1e-12);
        assert_eq!(q.get(1, 0), 0.0);
        let pi = TabularPolicy::static_binary(3, 0.5).unwrap();
        // V1 = 0.5·1 + 0.5·0.5 = 0.75; V2 = 0.5 + 0.5(0.5 + 0.9·0.75) = 1.0875
        // V3 = 0.5 + 0.5(0.5 + 0.9·1.0875)
        let expect = 0.5 + 0.5 * (0.5 + 0.9 * 1.0875);
        assert!((mdp.exact_policy_value(&pi).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn enumeration_sums_to_one_and_reproduces_value() {
        let mdp = two_state_chain();
        let pi = TabularPolicy::static_binary(3, 0.3).unwrap();
        let all = mdp.enumerate_trajectories(&pi, DEFAULT_ENUMERATION_CAP).unwrap();
        let total: f64 = all.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let d = discounts(mdp.gamma(), mdp.horizon());
        let v: f64 = all.iter().map(|(t, p)| p * t.discounted_return(&d)).sum();
        assert!((v - mdp.exact_policy_value(&pi).unwrap()).abs() < 1e-12);
        assert!(matches!(mdp.enumerate_trajectories(&pi, 2), Err(OpeError::EnumerationCap { cap: 2 })));
    }

    #[test]
    fn monte_carlo_rejects_zero_rollouts() {
        let mdp = two_state_chain();
        let pi = TabularPolicy::static_binary(3, 0.3).unwrap();
        assert!(mdp.monte_carlo_value(&pi, 0, 1).is_err());
    }
}
