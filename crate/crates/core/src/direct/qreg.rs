//! Importance-weighted regression of returns onto a Q table.

use super::{DirectConfig, QFit};
use crate::error::{OpeError, Result};
use crate::qtable::QTable;
use crate::weights::EvalContext;

/// Weighted returns `R_t = r_t + γ ρ_{t+1} R_{t+1}` for trajectory `i`.
pub(crate) fn weighted_returns(ctx: &EvalContext<'_>, i: usize) -> Vec<f64> {
    let traj = &ctx.dataset.trajectories()[i];
    let t_max = traj.len();
    let mut out = vec![0.0; t_max];
    let mut next = 0.0;
    for t in (0..t_max).rev() {
        let carry = if t + 1 < t_max { ctx.gamma * ctx.rho.step(i, t + 1) * next } else { 0.0 };
        out[t] = traj.rewards[t] + carry;
        next = out[t];
    }
    out
}

/// Per cell, `Q(x,a) = Σ w R / (Σ w + reg_omega)` with `w = γ^t ρ_{0:t}`: the
/// closed-form minimizer of the weighted squared loss plus `reg_omega‖Q‖²`.
pub fn q_reg(ctx: &EvalContext<'_>, cfg: &DirectConfig) -> Result<QFit> {
    let ds = ctx.dataset;
    let (ns, na) = (ds.n_states(), ds.n_actions());
    let abs = ds.absorbing_state();
    let mut num = vec![0.0; ns * na];
    let mut den = vec![0.0; ns * na];
    for (i, traj) in ds.trajectories().iter().enumerate() {
        let ret = weighted_returns(ctx, i);
        for t in 0..traj.len() {
            let x = traj.states[t];
            if x == abs {
                break;
            }
            let k = x * na + traj.actions[t];
            let w = ctx.discounts[t] * ctx.rho.cum(i, t);
            num[k] += w * ret[t];
            den[k] += w;
        }
    }
    let q: Vec<f64> =
        num.iter().zip(&den).map(|(n, d)| if d + cfg.reg_omega > 0.0 { n / (d + cfg.reg_omega) } else { 0.0 }).collect();
    if q.iter().any(|v| !v.is_finite()) {
        return Err(OpeError::Solver("Q-Reg weights overflowed".into()));
    }
    Ok(QFit::closed_form(QTable::new(ns, na, q)?))
}
