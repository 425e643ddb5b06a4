//! Q fitted to minimize the variance of the doubly robust estimator.
//!
//! For a table the objective separates by state. With `D = diag π_e(·|x)`
//! and `Ω = diag(1/π_b(·|x)) − eeᵀ`, the term of a logged step is
//! `W (Dq − R e_a)ᵀ Ω (Dq − R e_a)`, so each state solves
//! `(ΣW · DΩD + reg I) q = DΩ Σ W R e_a`.
//!
//! `Ω π_b = 0`, so without the ridge the system is always singular along
//! `D⁻¹π_b`; the ridge picks the minimum-norm solution in that direction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::qreg::weighted_returns;
use super::{DirectConfig, QFit};
use crate::error::{OpeError, Result};
use crate::qtable::QTable;
use crate::weights::EvalContext;

fn step_weight(ctx: &EvalContext<'_>, cfg: &DirectConfig, i: usize, t: usize) -> f64 {
    let rho = if cfg.mrdr_per_decision { ctx.rho.cum_before(i, t) } else { ctx.rho.full(i) };
    ctx.discounts[t] * ctx.discounts[t] * rho * rho * ctx.rho.step(i, t)
}

fn omega_matrices(ctx: &EvalContext<'_>, x: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let na = ctx.dataset.n_actions();
    let pb = ctx.pi_b.row(x);
    if pb.iter().any(|p| *p <= 0.0) {
        return Err(OpeError::InvalidPolicy(format!("MRDR needs π_b(a|{x}) > 0 for every action")));
    }
    let omega = DMatrix::from_fn(na, na, |r, c| if r == c { 1.0 / pb[r] - 1.0 } else { -1.0 });
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(ctx.pi_e.row(x)));
    let d_omega = &d * &omega;
    let d_omega_d = &d_omega * &d;
    Ok((d_omega, d_omega_d))
}

pub fn mrdr(ctx: &EvalContext<'_>, cfg: &DirectConfig) -> Result<QFit> {
    let ds = ctx.dataset;
    let (ns, na) = (ds.n_states(), ds.n_actions());
    let abs = ds.absorbing_state();
    let mut weight_sum = vec![0.0; ns];
    let mut target = vec![0.0; ns * na];
    for (i, traj) in ds.trajectories().iter().enumerate() {
        let ret = weighted_returns(ctx, i);
        for t in 0..traj.len() {
            let x = traj.states[t];
            if x == abs {
                break;
            }
            let w = step_weight(ctx, cfg, i, t);
            weight_sum[x] += w;
            target[x * na + traj.actions[t]] += w * ret[t];
        }
    }

    let mut q = QTable::zeros(ns, na);
    for x in (0..ns).filter(|x| *x != abs && weight_sum[*x] > 0.0) {
        let (d_omega, m) = omega_matrices(ctx, x)?;
        let rhs = d_omega * DVector::from_row_slice(&target[x * na..(x + 1) * na]);
        let eig = SymmetricEigen::new(m);
        let denom: Vec<f64> = eig.eigenvalues.iter().map(|l| weight_sum[x] * l.max(0.0) + cfg.reg_omega).collect();
        let scale = denom.iter().copied().fold(0.0, f64::max);
        if denom.iter().any(|d| *d <= 1e-12 * scale) {
            return Err(OpeError::Solver(format!("MRDR system for state {x} is singular")));
        }
        let coords = eig.eigenvectors.transpose() * rhs;
        let scaled = DVector::from_iterator(na, coords.iter().zip(&denom).map(|(c, d)| c / d));
        let sol = &eig.eigenvectors * scaled;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(OpeError::Solver(format!("MRDR solution for state {x} is not finite")));
        }
        q.row_mut(x).copy_from_slice(sol.as_slice());
    }
    Ok(QFit::closed_form(q))
}

/// The regularized objective minimized by [`mrdr`], evaluated at `q`.
pub fn mrdr_objective(ctx: &EvalContext<'_>, cfg: &DirectConfig, q: &QTable) -> Result<f64> {
    let ds = ctx.dataset;
    let na = ds.n_actions();
    let abs = ds.absorbing_state();
    let mut total = cfg.reg_omega * q.values().iter().map(|v| v * v).sum::<f64>();
    for (i, traj) in ds.trajectories().iter().enumerate() {
        let ret = weighted_returns(ctx, i);
        for t in 0..traj.len() {
            let x = traj.states[t];
            if x == abs {
                break;
            }
            let pb = ctx.pi_b.row(x);
            if pb.iter().any(|p| *p <= 0.0) {
                return Err(OpeError::InvalidPolicy(format!("MRDR needs π_b(a|{x}) > 0 for every action")));
            }
            let resid: Vec<f64> = (0..na)
                .map(|b| ctx.pi_e.prob(x, b) * q.get(x, b) - if b == traj.actions[t] { ret[t] } else { 0.0 })
                .collect();
            let diag: f64 = resid.iter().zip(pb).map(|(r, p)| r * r / p).sum();
            let sum: f64 = resid.iter().sum();
            total += step_weight(ctx, cfg, i, t) * (diag - sum * sum);
        }
    }
    Ok(total)
}
