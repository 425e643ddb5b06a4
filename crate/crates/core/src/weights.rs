//! Cumulative importance weights `ρ^i_{0:t} = Π_{s≤t} π_e(a_s|x_s) / π_b(a_s|x_s)`.

use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::mdp::discounts;
use crate::policy::TabularPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct RhoTable {
    n: usize,
    horizon: usize,
    ratio: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RhoTable {
    pub fn n_trajectories(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Per-step ratio `π_e(a_t|x_t) / π_b(a_t|x_t)`.
    #[inline]
    pub fn step(&self, i: usize, t: usize) -> f64 {
        self.ratio[i * self.horizon + t]
    }

    /// `ρ^i_{0:t}`.
    #[inline]
    pub fn cum(&self, i: usize, t: usize) -> f64 {
        self.cumulative[i * self.horizon + t]
    }

    /// `ρ^i_{0:t-1}`, which is 1 at `t = 0`.
    #[inline]
    pub fn cum_before(&self, i: usize, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.cum(i, t - 1)
        }
    }

    /// `ρ^i_{0:T-1}`.
    #[inline]
    pub fn full(&self, i: usize) -> f64 {
        self.cum(i, self.horizon - 1)
    }

    /// `ρ^i_{j:k}` (empty ranges give 1).
    pub fn range(&self, i: usize, j: usize, k: usize) -> f64 {
        (j..=k.min(self.horizon - 1)).map(|t| self.step(i, t)).product()
    }

    /// `Σ_i ρ^i_{0:t}` for each `t`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.horizon];
        for i in 0..self.n {
            for (t, s) in sums.iter_mut().enumerate() {
                *s += self.cum(i, t);
            }
        }
        sums
    }

    /// Every entry multiplied by `factor` (for scale-invariance checks).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.cumulative.iter_mut().for_each(|w| *w *= factor);
        out
    }
}

pub fn cumulative_rho(dataset: &Dataset, pi_e: &TabularPolicy, pi_b: &TabularPolicy) -> Result<RhoTable> {
    if dataset.is_empty() {
        return Err(OpeError::EmptyDataset);
    }
    let horizon = dataset.horizon();
    let n = dataset.len();
    let mut ratio = Vec::with_capacity(n * horizon);
    let mut cumulative = Vec::with_capacity(n * horizon);
    for (i, traj) in dataset.trajectories().iter().enumerate() {
        let mut acc = 1.0;
        for (t, (&x, &a)) in traj.states.iter().zip(&traj.actions).enumerate() {
            let pb = pi_b.prob(x, a);
            if pb <= 0.0 {
                return Err(OpeError::SupportViolation { trajectory: i, step: t, state: x, action: a });
            }
            let r = pi_e.prob(x, a) / pb;
            acc *= r;
            ratio.push(r);
            cumulative.push(acc);
        }
    }
    Ok(RhoTable { n, horizon, ratio, cumulative })
}

/// Everything the weighting estimators share for one `(dataset, π_e, π_b, γ)`.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    pub dataset: &'a Dataset,
    pub pi_e: &'a TabularPolicy,
    pub pi_b: &'a TabularPolicy,
    pub gamma: f64,
    pub rho: RhoTable,
    /// `discounts[t] = γ^t` for `t = 0..=T`.
    pub discounts: Vec<f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(dataset: &'a Dataset, pi_e: &'a TabularPolicy, pi_b: &'a TabularPolicy, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(OpeError::InvalidInput(format!("gamma = {gamma} is not in (0, 1]")));
        }
        for pi in [pi_e, pi_b] {
            if pi.n_states() != dataset.n_states() || pi.n_actions() != dataset.n_actions() {
                return Err(OpeError::InvalidPolicy("policy shape does not match dataset".into()));
            }
        }
        let rho = cumulative_rho(dataset, pi_e, pi_b)?;
        Ok(Self { dataset, pi_e, pi_b, gamma, rho, discounts: discounts(gamma, dataset.horizon()) })
    }

    /// Same context with `ρ` replaced, e.g. rescaled.
    pub fn with_rho(&self, rho: RhoTable) -> Self {
        Self { rho, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.dataset.len()
    }

    pub fn horizon(&self) -> usize {
        self.dataset.horizon()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Trajectory;

    fn one_step(action: usize, steps: usize) -> Dataset {
        let traj = Trajectory { states: vec![0; steps + 1], actions: vec![action; steps], rewards: vec![1.0; steps] };
        let pi_b = TabularPolicy::static_binary(2, 0.5).unwrap();
        Dataset::from_trajectories(vec![traj], pi_b, 1).unwrap()
    }

    #[test]
    fn identical_policies_give_unit_weights() {
        let ds = one_step(1, 4);
        let rho = cumulative_rho(&ds, ds.pi_b(), ds.pi_b()).unwrap();
        for t in 0..4 {
            assert_eq!(rho.cum(0, t), 1.0);
        }
    }

    #[test]
    fn hand_computed_products() {
        let ds = one_step(0, 2);
        let pi_e = TabularPolicy::static_binary(2, 0.8).unwrap();
        let rho = cumulative_rho(&ds, &pi_e, ds.pi_b()).unwrap();
        assert!((rho.cum(0, 0) - 1.6).abs() < 1e-15);
        assert!((rho.cum(0, 1) - 2.56).abs() < 1e-15);
        assert_eq!(rho.cum_before(0, 0), 1.0);
        assert_eq!(rho.range(0, 2, 1), 1.0);
        assert!((rho.range(0, 1, 1) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn zero_behavior_probability_names_the_offending_step() {
        let ds = one_step(1, 3);
        let det = TabularPolicy::static_binary(2, 1.0).unwrap();
        let err = cumulative_rho(&ds, ds.pi_b(), &det).unwrap_err();
        assert!(matches!(err, OpeError::SupportViolation { trajectory: 0, step: 0, state: 0, action: 1 }));
    }
}
