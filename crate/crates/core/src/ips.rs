//! Trajectory-reweighting estimators.
//!
//! All sums are accumulated per trajectory first and then across
//! trajectories, so when every weight is exactly 1 the five variants agree
//! to rounding of the final division.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::mdp::discounts;
use crate::weights::EvalContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IpsVariant {
    Is,
    Pdis,
    Wis,
    Pdwis,
    Naive,
}

impl IpsVariant {
    pub const ALL: [IpsVariant; 5] = [Self::Is, Self::Pdis, Self::Wis, Self::Pdwis, Self::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Self::Is => "IS",
            Self::Pdis => "PDIS",
            Self::Wis => "WIS",
            Self::Pdwis => "PDWIS",
            Self::Naive => "NAIVE",
        }
    }
}

impl fmt::Display for IpsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IpsVariant {
    type Err = OpeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| OpeError::InvalidInput(format!("unknown IPS variant {s:?}")))
    }
}

pub fn ips_estimate(variant: IpsVariant, ctx: &EvalContext<'_>) -> Result<f64> {
    match variant {
        IpsVariant::Is => Ok(is(ctx)),
        IpsVariant::Pdis => Ok(pdis(ctx)),
        IpsVariant::Wis => wis(ctx),
        IpsVariant::Pdwis => pdwis(ctx),
        IpsVariant::Naive => Ok(naive(ctx.dataset, ctx.gamma)),
    }
}

/// Plain average of discounted returns; ignores both policies.
pub fn naive(dataset: &Dataset, gamma: f64) -> f64 {
    let d = discounts(gamma, dataset.horizon());
    let total: f64 = dataset.trajectories().iter().map(|t| t.discounted_return(&d)).sum();
    total / dataset.len() as f64
}

fn returns<'a>(ctx: &'a EvalContext<'a>) -> impl Iterator<Item = f64> + 'a {
    ctx.dataset.trajectories().iter().map(|t| t.discounted_return(&ctx.discounts))
}

fn is(ctx: &EvalContext<'_>) -> f64 {
    let total: f64 = returns(ctx).enumerate().map(|(i, g)| ctx.rho.full(i) * g).sum();
    total / ctx.n() as f64
}

fn pdis(ctx: &EvalContext<'_>) -> f64 {
    let total: f64 = ctx
        .dataset
        .trajectories()
        .iter()
        .enumerate()
        .map(|(i, traj)| traj.rewards.iter().enumerate().map(|(t, r)| ctx.discounts[t] * ctx.rho.cum(i, t) * r).sum::<f64>())
        .sum();
    total / ctx.n() as f64
}

fn wis(ctx: &EvalContext<'_>) -> Result<f64> {
    let norm: f64 = (0..ctx.n()).map(|i| ctx.rho.full(i)).sum();
    if norm <= 0.0 {
        return Err(OpeError::DegenerateWeights("Σ_i ρ_{0:T-1} is zero".into()));
    }
    let total: f64 = returns(ctx).enumerate().map(|(i, g)| ctx.rho.full(i) * g).sum();
    Ok(total / norm)
}

fn pdwis(ctx: &EvalContext<'_>) -> Result<f64> {
    let norms = ctx.rho.column_sums();
    if let Some(t) = norms.iter().position(|w| *w <= 0.0) {
        return Err(OpeError::DegenerateWeights(format!("Σ_i ρ_{{0:{t}}} is zero")));
    }
    let total: f64 = ctx
        .dataset
        .trajectories()
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            traj.rewards.iter().enumerate().map(|(t, r)| ctx.discounts[t] * (ctx.rho.cum(i, t) / norms[t]) * r).sum::<f64>()
        })
        .sum();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Trajectory;
    use crate::policy::TabularPolicy;

    #[test]
    fn single_step_hand_values() {
        let traj = Trajectory { states: vec![0, 1], actions: vec![0], rewards: vec![1.0] };
        let pi_b = TabularPolicy::static_binary(2, 0.5).unwrap();
        let pi_e = TabularPolicy::static_binary(2, 0.8).unwrap();
        let ds = Dataset::from_trajectories(vec![traj], pi_b.clone(), 1).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 1.0).unwrap();
        let get = |v| ips_estimate(v, &ctx).unwrap();
        assert!((get(IpsVariant::Is) - 1.6).abs() < 1e-15);
        assert!((get(IpsVariant::Pdis) - 1.6).abs() < 1e-15);
        assert!((get(IpsVariant::Wis) - 1.0).abs() < 1e-15);
        assert!((get(IpsVariant::Pdwis) - 1.0).abs() < 1e-15);
        assert!((get(IpsVariant::Naive) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_weights_are_degenerate() {
        let traj = Trajectory { states: vec![0, 1], actions: vec![1], rewards: vec![1.0] };
        let pi_b = TabularPolicy::static_binary(2, 0.5).unwrap();
        let pi_e = TabularPolicy::static_binary(2, 1.0).unwrap();
        let ds = Dataset::from_trajectories(vec![traj], pi_b.clone(), 1).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 1.0).unwrap();
        assert!(matches!(ips_estimate(IpsVariant::Wis, &ctx), Err(OpeError::DegenerateWeights(_))));
        assert!(matches!(ips_estimate(IpsVariant::Pdwis, &ctx), Err(OpeError::DegenerateWeights(_))));
        assert_eq!(ips_estimate(IpsVariant::Is, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for v in IpsVariant::ALL {
            assert_eq!(v.name().parse::<IpsVariant>().unwrap(), v);
        }
    }
}
