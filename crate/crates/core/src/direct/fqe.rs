//! Fitted Q evaluation on a table.

use super::{check_finite, DirectConfig, QFit, TransitionCounts};
use crate::data::Dataset;
use crate::error::{OpeError, Result};
use crate::policy::TabularPolicy;
use crate::qtable::QTable;

/// Iterates `Q_k(x,a) = mean over logged (x,a) of r + γ E_{π_e} Q_{k-1}(x',·)`
/// from `Q_0 = 0` until the max-abs change drops below `fqe_eps`.
/// Unvisited pairs and the absorbing state stay at 0.
pub fn fqe(dataset: &Dataset, pi_e: &TabularPolicy, gamma: f64, cfg: &DirectConfig) -> Result<QFit> {
    if dataset.is_empty() {
        return Err(OpeError::EmptyDataset);
    }
    let (ns, na) = (dataset.n_states(), dataset.n_actions());
    let counts = TransitionCounts::from_dataset(dataset);
    let visited: Vec<(usize, usize, usize)> = (0..ns)
        .flat_map(|x| (0..na).map(move |a| (x, a)))
        .map(|(x, a)| (x, a, counts.key(x, a)))
        .filter(|&(_, _, k)| counts.visits[k] > 0)
        .collect();

    let mut q = QTable::zeros(ns, na);
    let mut v = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut next = QTable::zeros(ns, na);
        for &(x, a, k) in &visited {
            let n = counts.visits[k] as f64;
            let future: f64 = counts.successors[k].iter().map(|&(s2, c, _)| c as f64 * v[s2]).sum();
            next.set(x, a, (counts.reward_sum[k] + gamma * future) / n);
        }
        residual = next.max_abs_diff(&q);
        q = next;
        v = q.state_values(pi_e);
        if residual < cfg.fqe_eps {
            break;
        }
    }
    check_finite(&q, "FQE")?;
    Ok(QFit { q, iterations, residual, converged: residual < cfg.fqe_eps })
}
