//! Logged trajectories and datasets.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{OpeError, Result};
use crate::mdp::TabularMdp;
use crate::policy::TabularPolicy;
use crate::rng;

/// A fixed-length episode: `T + 1` states, `T` actions and rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `Σ_t γ^t r_t`, with `discounts[t] = γ^t`.
    pub fn discounted_return(&self, discounts: &[f64]) -> f64 {
        self.rewards.iter().zip(discounts).map(|(r, g)| g * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    seed: u64,
    pi_b_known: bool,
    pi_b: TabularPolicy,
    n_states: usize,
    absorbing_state: usize,
    horizon: usize,
}

impl Dataset {
    pub fn new(
        trajectories: Vec<Trajectory>,
        seed: u64,
        pi_b: TabularPolicy,
        pi_b_known: bool,
        absorbing_state: usize,
    ) -> Result<Self> {
        let first = trajectories.first().ok_or(OpeError::EmptyDataset)?;
        let horizon = first.len();
        let n_states = pi_b.n_states();
        for (i, t) in trajectories.iter().enumerate() {
            if t.len() != horizon || t.rewards.len() != horizon || t.states.len() != horizon + 1 {
                return Err(OpeError::InvalidInput(format!("trajectory {i} does not have length {horizon}")));
            }
            if t.states.iter().any(|s| *s >= n_states) || t.actions.iter().any(|a| *a >= pi_b.n_actions()) {
                return Err(OpeError::InvalidInput(format!("trajectory {i} has an out-of-range state or action")));
            }
        }
        if absorbing_state >= n_states {
            return Err(OpeError::InvalidInput("absorbing state out of range".into()));
        }
        Ok(Self { trajectories, seed, pi_b_known, pi_b, n_states, absorbing_state, horizon })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }
    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn pi_b_known(&self) -> bool {
        self.pi_b_known
    }
    pub fn pi_b(&self) -> &TabularPolicy {
        &self.pi_b
    }
    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.pi_b.n_actions()
    }
    pub fn absorbing_state(&self) -> usize {
        self.absorbing_state
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Replaces the behavior policy, e.g. with one regressed from the data.
    pub fn with_behavior_policy(mut self, pi_b: TabularPolicy, known: bool) -> Result<Self> {
        if pi_b.n_states() != self.n_states || pi_b.n_actions() != self.n_actions() {
            return Err(OpeError::InvalidPolicy("behavior policy shape does not match dataset".into()));
        }
        self.pi_b = pi_b;
        self.pi_b_known = known;
        Ok(self)
    }

    /// Relabels states through `observation`, producing the dataset an agent
    /// sees in a partially observed environment. `pi_b` must be defined on
    /// the observation space.
    pub fn observe(&self, observation: &[usize], absorbing_obs: usize, pi_b: TabularPolicy) -> Result<Self> {
        if observation.len() != self.n_states {
            return Err(OpeError::InvalidInput("observation map must cover every state".into()));
        }
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| Trajectory {
                states: t.states.iter().map(|s| observation[*s]).collect(),
                actions: t.actions.clone(),
                rewards: t.rewards.clone(),
            })
            .collect();
        Self::new(trajectories, self.seed, pi_b, self.pi_b_known, absorbing_obs)
    }

    /// Keeps the first `n` trajectories.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(OpeError::EmptyDataset);
        }
        let mut out = self.clone();
        out.trajectories.truncate(n);
        Ok(out)
    }

    /// Builds a dataset from explicit trajectories, mainly for tests and oracles.
    pub fn from_trajectories(trajectories: Vec<Trajectory>, pi_b: TabularPolicy, absorbing_state: usize) -> Result<Self> {
        Self::new(trajectories, 0, pi_b, true, absorbing_state)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, meta: &DatasetMetadata) -> Result<Self> {
        let mut trajectories = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trajectories.push(serde_json::from_str(&line)?);
        }
        let pi_b = TabularPolicy::from_rows(&meta.pi_b_probs)?;
        let ds = Self::new(trajectories, meta.seed, pi_b, meta.pi_b_known, meta.absorbing_state)?;
        if ds.len() != meta.n || ds.horizon != meta.horizon {
            return Err(OpeError::InvalidInput(format!(
                "metadata declares N={} T={}, file has N={} T={}",
                meta.n,
                meta.horizon,
                ds.len(),
                ds.horizon
            )));
        }
        Ok(ds)
    }
}

/// Sidecar written next to a JSON-lines dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub env: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Human-readable behavior policy description, e.g. `static(p0=0.2)`.
    pub pi_b: String,
    pub pi_b_known: bool,
    pub n_states: usize,
    pub n_actions: usize,
    pub absorbing_state: usize,
    pub pi_b_probs: Vec<Vec<f64>>,
}

impl DatasetMetadata {
    pub fn describe(dataset: &Dataset, env: &str, gamma: f64, pi_b: &str) -> Self {
        Self {
            env: env.to_owned(),
            horizon: dataset.horizon,
            gamma,
            seed: dataset.seed,
            n: dataset.len(),
            pi_b: pi_b.to_owned(),
            pi_b_known: dataset.pi_b_known,
            n_states: dataset.n_states,
            n_actions: dataset.n_actions(),
            absorbing_state: dataset.absorbing_state,
            pi_b_probs: dataset.pi_b.rows(),
        }
    }
}

/// Rolls out `n` behavior-policy episodes. Trajectory `i` draws from its own
/// stream of `seed`, so the result does not depend on generation order.
pub fn generate_dataset(mdp: &TabularMdp, pi_b: &TabularPolicy, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(OpeError::EmptyDataset);
    }
    if pi_b.n_states() != mdp.n_states() || pi_b.n_actions() != mdp.n_actions() {
        return Err(OpeError::InvalidPolicy("behavior policy shape does not match the MDP".into()));
    }
    let trajectories = (0..n as u64).map(|i| mdp.rollout(pi_b, &mut rng::stream(seed, i))).collect();
    Dataset::new(trajectories, seed, pi_b.clone(), true, mdp.absorbing_state())
}
