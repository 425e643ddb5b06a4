//! Multi-step backups with per-step trace coefficients: Retrace(λ),
//! Tree-Backup(λ) and Q^π(λ).

use std::fmt;

use super::{check_finite, DirectConfig, QFit};
use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::policy::TabularPolicy;
use crate::qtable::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaVariant {
    /// `c = λ min(1, π_e/π_b)`
    Retrace,
    /// `c = λ π_e(a|x)`
    Tree,
    /// `c = λ`
    QPiLambda,
}

impl fmt::Display for LambdaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaVariant::Retrace => "retrace",
            LambdaVariant::Tree => "tree",
            LambdaVariant::QPiLambda => "qpi_lambda",
        })
    }
}

fn trace_coefficients(
    variant: LambdaVariant,
    dataset: &Dataset,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    dataset
        .trajectories()
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            traj.states[..traj.len()]
                .iter()
                .zip(&traj.actions)
                .enumerate()
                .map(|(t, (&x, &a))| match variant {
                    LambdaVariant::QPiLambda => Ok(lambda),
                    LambdaVariant::Tree => Ok(lambda * pi_e.prob(x, a)),
                    LambdaVariant::Retrace => {
                        let pb = pi_b.prob(x, a);
                        if pb <= 0.0 {
                            return Err(OpeError::SupportViolation { trajectory: i, step: t, state: x, action: a });
                        }
                        Ok(lambda * (pi_e.prob(x, a) / pb).min(1.0))
                    }
                })
                .collect()
        })
        .collect()
}

/// `Q_k = Q_{k-1} + mean over occurrences of (x,a) at t0 of
/// Σ_{t≥t0} γ^{t-t0} (Π_{s=t0+1..t} c_s) δ_t`, from `Q_0 = 0`, with the same
/// stopping rule as FQE.
pub fn lambda_backup(
    variant: LambdaVariant,
    dataset: &Dataset,
    pi_e: &TabularPolicy,
    pi_b: &TabularPolicy,
    gamma: f64,
    cfg: &DirectConfig,
) -> Result<QFit> {
    if dataset.is_empty() {
        return Err(OpeError::EmptyDataset);
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());
    let abs = dataset.absorbing_state();
    let coeffs = trace_coefficients(variant, dataset, pi_e, pi_b, cfg.lambda)?;

    let mut occurrences = vec![0usize; ns * na];
    for traj in dataset.trajectories() {
        for (x, a) in traj.states.iter().zip(&traj.actions).filter(|(x, _)| **x != abs) {
            occurrences[x * na + a] += 1;
        }
    }

    let mut q = QTable::zeros(ns, na);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut acc = vec![0.0; ns * na];
    while iterations < cfg.max_iter {
        iterations += 1;
        let v = q.state_values(pi_e);
        acc.iter_mut().for_each(|x| *x = 0.0);
        for (traj, c) in dataset.trajectories().iter().zip(&coeffs) {
            let mut g = 0.0;
            for t in (0..traj.len()).rev() {
                let x = traj.states[t];
                if x == abs {
                    g = 0.0;
                    continue;
                }
                let a = traj.actions[t];
                let delta = traj.rewards[t] + gamma * v[traj.states[t + 1]] - q.get(x, a);
                let carry = if t + 1 < traj.len() { c[t + 1] } else { 0.0 };
                g = delta + gamma * carry * g;
                acc[x * na + a] += g;
            }
        }
        residual = 0.0;
        for (k, (&sum, &n)) in acc.iter().zip(&occurrences).enumerate() {
            if n > 0 {
                let step = sum / n as f64;
                q.row_mut(k / na)[k % na] += step;
                residual = f64::max(residual, step.abs());
            }
        }
        check_finite(&q, "lambda backup")?;
        if residual < cfg.fqe_eps {
            break;
        }
    }
    Ok(QFit { q, iterations, residual, converged: residual < cfg.fqe_eps })
}
