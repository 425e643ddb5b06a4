//! State-by-action stochastic policies.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::qtable::QTable;

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    /// Builds a policy from a row-major `n_states × n_actions` table.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(OpeError::InvalidPolicy("policy needs at least one state and action".into()));
        }
        if probs.len() != n_states * n_actions {
            return Err(OpeError::InvalidPolicy(format!(
                "expected {} probabilities, got {}",
                n_states * n_actions,
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(OpeError::InvalidPolicy(format!("state {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(OpeError::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(OpeError::InvalidPolicy("ragged probability rows".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self { n_states, n_actions, probs: vec![p; n_states * n_actions] }
    }

    /// State-independent two-action policy with `π(a=0) = p0` everywhere.
    pub fn static_binary(n_states: usize, p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(OpeError::InvalidPolicy(format!("p0 = {p0} is not a probability")));
        }
        let row = [p0, 1.0 - p0];
        Ok(Self { n_states, n_actions: 2, probs: row.repeat(n_states) })
    }

    /// Mixture of the greedy policy of `q` (probability `1 − eps`) with the
    /// uniform policy (probability `eps`). Ties go to the lowest action index.
    pub fn eps_greedy(q: &QTable, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(OpeError::InvalidPolicy(format!("eps = {eps} is not in [0, 1]")));
        }
        let n_actions = q.n_actions();
        let explore = eps / n_actions as f64;
        let mut probs = vec![explore; q.n_states() * n_actions];
        for s in 0..q.n_states() {
            probs[s * n_actions + q.argmax(s)] += 1.0 - eps;
        }
        Ok(Self { n_states: q.n_states(), n_actions, probs })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.n_actions + action]
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.n_actions).map(<[f64]>::to_vec).collect()
    }

    /// `sup_{x,a} π(a|x) / other(a|x)`; `+∞` when `other` misses support of `self`.
    pub fn max_ratio(&self, other: &TabularPolicy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .filter(|(num, _)| **num > 0.0)
            .map(|(num, den)| if *den > 0.0 { num / den } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Per-state empirical action frequencies with additive smoothing `alpha`.
///
/// States never visited get the uniform row (the `alpha → ∞` limit); with
/// `alpha = 0` an unvisited state still falls back to uniform.
pub fn estimate_behavior_policy(dataset: &Dataset, alpha: f64) -> Result<TabularPolicy> {
    if dataset.is_empty() {
        return Err(OpeError::EmptyDataset);
    }
    if !(alpha >= 0.0) {
        return Err(OpeError::InvalidInput(format!("smoothing must be non-negative, got {alpha}")));
    }
    let (n_states, n_actions) = (dataset.n_states(), dataset.n_actions());
    let mut counts = vec![0.0; n_states * n_actions];
    for traj in dataset.trajectories() {
        for (&s, &a) in traj.states.iter().zip(&traj.actions) {
            counts[s * n_actions + a] += 1.0;
        }
    }
    let mut probs = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        let row = &counts[s * n_actions..(s + 1) * n_actions];
        let total: f64 = row.iter().sum::<f64>() + alpha * n_actions as f64;
        for a in 0..n_actions {
            probs[s * n_actions + a] =
                if total > 0.0 { (row[a] + alpha) / total } else { 1.0 / n_actions as f64 };
        }
    }
    TabularPolicy::new(n_states, n_actions, probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_rows_that_do_not_sum_to_one() {
        assert!(TabularPolicy::new(1, 2, vec![0.5, 0.4]).is_err());
        assert!(TabularPolicy::new(1, 2, vec![1.5, -0.5]).is_err());
        assert!(TabularPolicy::new(1, 2, vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn eps_greedy_extremes() {
        let q = QTable::from_rows(&[vec![0.0, 1.0, 0.5], vec![2.0, 2.0, -1.0]]).unwrap();
        let uniform = TabularPolicy::eps_greedy(&q, 1.0).unwrap();
        for s in 0..2 {
            for a in 0..3 {
                assert!((uniform.prob(s, a) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let greedy = TabularPolicy::eps_greedy(&q, 0.0).unwrap();
        assert_eq!(greedy.row(0), &[0.0, 1.0, 0.0]);
        // tie between actions 0 and 1 resolves to the lower index
        assert_eq!(greedy.row(1), &[1.0, 0.0, 0.0]);
        let mixed = TabularPolicy::eps_greedy(&q, 0.3).unwrap();
        assert!((mixed.prob(0, 1) - (0.7 + 0.1)).abs() < 1e-15);
        assert!((mixed.prob(0, 0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn max_ratio_flags_support_violation() {
        let e = TabularPolicy::static_binary(3, 0.9).unwrap();
        let b = TabularPolicy::static_binary(3, 0.1).unwrap();
        assert!((e.max_ratio(&b) - 9.0).abs() < 1e-12);
        let det = TabularPolicy::static_binary(3, 1.0).unwrap();
        assert_eq!(b.max_ratio(&det), f64::INFINITY);
    }
}
