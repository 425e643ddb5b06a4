use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::policy::TabularPolicy;

/// State-by-action value estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, q: vec![0.0; n_states * n_actions] }
    }

    pub fn new(n_states: usize, n_actions: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != n_states * n_actions {
            return Err(OpeError::InvalidInput(format!(
                "Q table needs {} entries, got {}",
                n_states * n_actions,
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(OpeError::InvalidInput("Q table has non-finite entries".into()));
        }
        Ok(Self { n_states, n_actions, q })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(OpeError::InvalidInput("ragged Q rows".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.q[state * self.n_actions + action] = value;
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    /// `V(x) = Σ_a π(a|x) Q(x, a)`.
    #[inline]
    pub fn state_value(&self, policy: &TabularPolicy, state: usize) -> f64 {
        self.row(state).iter().zip(policy.row(state)).map(|(q, p)| q * p).sum()
    }

    pub fn state_values(&self, policy: &TabularPolicy) -> Vec<f64> {
        (0..self.n_states).map(|s| self.state_value(policy, s)).collect()
    }

    /// Lowest-index maximizing action.
    pub fn argmax(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Direct-method value: mean of `V̂(x_0)` over the dataset's start states.
    pub fn dm_value(&self, dataset: &Dataset, policy: &TabularPolicy) -> f64 {
        let n = dataset.len() as f64;
        dataset.trajectories().iter().map(|t| self.state_value(policy, t.states[0])).sum::<f64>() / n
    }

    pub fn to_json_matrix(&self) -> serde_json::Value {
        let rows: Vec<&[f64]> = self.q.chunks(self.n_actions).collect();
        json!({ "n_states": self.n_states, "n_actions": self.n_actions, "q": rows })
    }
}

/// Estimated discounted state-density ratio `d_{π_e} / d_{π_b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaTable {
    pub omega: Vec<f64>,
}

impl OmegaTable {
    pub fn scaled(&self, factor: f64) -> Self {
        Self { omega: self.omega.iter().map(|w| w * factor).collect() }
    }

    pub fn to_json_matrix(&self) -> serde_json::Value {
        json!({ "n_states": self.omega.len(), "omega": self.omega })
    }
}
