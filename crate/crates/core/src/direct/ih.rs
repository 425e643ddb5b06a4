//! Tabular state-density ratio estimation.
//!
//! The discounted occupancy `μ_π(s) = Σ_{t<T} γ^t d_{π,t}(s)` satisfies the
//! balance `μ_e(s') = d_0(s') + γ Σ_{s,a} μ_e^{<T-1}(s) π_e(a|s) P(s'|s,a)`.
//! Writing `μ_e = ω μ_b` and replacing expectations under `π_b` with sums
//! over the logged steps gives one linear equation per visited state:
//!
//! `Σ_i Σ_{t<T} γ^t ω(s_t) 1{s_t=s'} − Σ_i Σ_{t<T-1} γ^{t+1} ω(s_t) β_t 1{s_{t+1}=s'} = Σ_i 1{s_0=s'}`
//!
//! with `β_t = π_e(a_t|s_t)/π_b(a_t|s_t)`. The system `Aω = b` is solved as
//! a ridge problem pulled toward `ω = 1`, so on-policy data returns exactly
//! `ω ≡ 1` for any ridge weight.

use nalgebra::{DMatrix, DVector};

use super::DirectConfig;
use crate::error::{OpeError, Result};
use crate::qtable::OmegaTable;
use crate::weights::EvalContext;

/// Fits `ω` on the states visited before the horizon; other states get 0.
/// Negative solutions, possible with few samples, are clipped to 0.
pub fn ih_fit(ctx: &EvalContext<'_>, cfg: &DirectConfig) -> Result<OmegaTable> {
    let ds = ctx.dataset;
    let ns = ds.n_states();
    let mut column = vec![usize::MAX; ns];
    let mut visited = Vec::new();
    for traj in ds.trajectories() {
        for &s in &traj.states[..traj.len()] {
            if column[s] == usize::MAX {
                column[s] = visited.len();
                visited.push(s);
            }
        }
    }
    let m = visited.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, traj) in ds.trajectories().iter().enumerate() {
        let t_max = traj.len();
        b[column[traj.states[0]]] += 1.0;
        for t in 0..t_max {
            let c = column[traj.states[t]];
            a[(c, c)] += ctx.discounts[t];
            if t + 1 < t_max {
                let r = column[traj.states[t + 1]];
                a[(r, c)] -= ctx.discounts[t + 1] * ctx.rho.step(i, t);
            }
        }
    }

    let at = a.transpose();
    let mut lhs = &at * &a;
    for k in 0..m {
        lhs[(k, k)] += cfg.ih_reg;
    }
    let rhs = &at * &b + DVector::from_element(m, cfg.ih_reg);
    let sol = lhs
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| lhs.lu().solve(&rhs))
        .ok_or_else(|| OpeError::Solver("IH balance system is singular".into()))?;
    if sol.iter().any(|w| !w.is_finite()) {
        return Err(OpeError::Solver("IH solution is not finite".into()));
    }
    let mut omega = vec![0.0; ns];
    for (k, s) in visited.into_iter().enumerate() {
        omega[s] = sol[k].max(0.0);
    }
    Ok(OmegaTable { omega })
}

/// `V = (Σ_{t<T} γ^t) · Σ γ^t ω(s_t) β_t r_t / Σ γ^t ω(s_t) β_t`.
///
/// The ratio estimates the per-unit-mass reward of the discounted occupancy
/// of `π_e`; the leading factor restores the total mass so the result targets
/// `V(π_e)` under the dataset's discounting.
pub fn ih_estimate(ctx: &EvalContext<'_>, omega: &OmegaTable) -> Result<f64> {
    let ds = ctx.dataset;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, traj) in ds.trajectories().iter().enumerate() {
        let (mut n_i, mut d_i) = (0.0, 0.0);
        for t in 0..traj.len() {
            let w = ctx.discounts[t] * omega.omega[traj.states[t]] * ctx.rho.step(i, t);
            n_i += w * traj.rewards[t];
            d_i += w;
        }
        num += n_i;
        den += d_i;
    }
    if den <= 0.0 || !den.is_finite() {
        return Err(OpeError::DegenerateWeights("IH normalizer is zero".into()));
    }
    let mass: f64 = ctx.discounts[..ds.horizon()].iter().sum();
    Ok(mass * num / den)
}
