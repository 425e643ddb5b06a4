//! Aggregate error metrics.

use crate::error::{OpeError, Result};
use crate::policy::TabularPolicy;

/// `(1/m) Σ_i (V̂_i − V̄)² / V̄²` with `V̄` the mean of the `m` true values.
pub fn relative_mse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(OpeError::InvalidInput(format!(
            "relative MSE needs matching non-empty inputs, got {} estimates and {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    let m = estimates.len() as f64;
    let mean_truth = truths.iter().sum::<f64>() / m;
    if mean_truth == 0.0 {
        return Err(OpeError::ZeroMeanTruth);
    }
    let sq: f64 = estimates.iter().map(|v| (v - mean_truth).powi(2)).sum();
    Ok(sq / m / (mean_truth * mean_truth))
}

/// Marks every estimator whose error is within 10% of the best in one
/// condition. Non-finite errors are never marked.
pub fn near_top_marks(errors: &[f64]) -> Vec<bool> {
    let best = errors.iter().copied().filter(|e| e.is_finite()).fold(f64::INFINITY, f64::min);
    errors.iter().map(|e| e.is_finite() && *e <= 1.1 * best).collect()
}

/// `table[c][k]` is estimator `k`'s relative MSE in condition `c`; returns the
/// fraction of conditions in which each estimator is marked near-top.
pub fn near_top_frequency(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = table.first().map(Vec::len).unwrap_or(0);
    if width == 0 {
        return Err(OpeError::InvalidInput("near-top frequency needs a non-empty table".into()));
    }
    if table.iter().any(|row| row.len() != width) {
        return Err(OpeError::InvalidInput("ragged near-top table".into()));
    }
    let mut counts = vec![0usize; width];
    for row in table {
        for (c, marked) in counts.iter_mut().zip(near_top_marks(row)) {
            *c += marked as usize;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / table.len() as f64).collect())
}

/// `(max_{x,a} π_e(a|x) / π_b(a|x))^T`; infinite when `π_b` misses support.
pub fn policy_mismatch(pi_e: &TabularPolicy, pi_b: &TabularPolicy, horizon: usize) -> f64 {
    pi_e.max_ratio(pi_b).powi(horizon as i32)
}
