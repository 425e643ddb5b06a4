//! `min xᵀMx` over the probability simplex by projected gradient.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// Objective at the start point and after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl QpResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("history holds the start point")
    }
}

fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Projected gradient from the uniform point with step `1/L`, where `L` is a
/// Gershgorin bound on the gradient's Lipschitz constant; that step size
/// makes the objective non-increasing. Stops once no coordinate moves by more
/// than `tol`, or after `max_iter` iterations.
pub fn solve_simplex_qp(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> QpResult {
    let n = m.nrows();
    assert!(n > 0 && m.is_square(), "QP matrix must be square and non-empty");
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut history = vec![quad(m, &x)];
    let lipschitz = 2.0 * m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if n == 1 || lipschitz == 0.0 || !lipschitz.is_finite() {
        return QpResult { x: x.as_slice().to_vec(), objective_history: history, iterations: 0, converged: true };
    }
    let step = 1.0 / lipschitz;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let grad = (m + m.transpose()) * &x;
        let trial: Vec<f64> = x.iter().zip(grad.iter()).map(|(xi, g)| xi - step * g).collect();
        let next = DVector::from_vec(project_to_simplex(&trial));
        let moved = (&next - &x).amax();
        x = next;
        history.push(quad(m, &x));
        if moved < tol {
            converged = true;
            break;
        }
    }
    QpResult { x: x.as_slice().to_vec(), objective_history: history, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = project_to_simplex(&[-5.0, 1.5, 1.5]);
        assert_eq!(p, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn diagonal_problem_has_inverse_weighting() {
        // min Σ d_k x_k² on the simplex → x_k ∝ 1/d_k
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let res = solve_simplex_qp(&m, 100_000, 1e-14);
        let z = 1.0 + 0.5 + 0.25;
        for (x, d) in res.x.iter().zip([1.0, 2.0, 4.0]) {
            assert!((x - 1.0 / d / z).abs() < 1e-9, "{:?}", res.x);
        }
        assert!(res.converged);
    }

    #[test]
    fn zero_matrix_keeps_uniform_start() {
        let res = solve_simplex_qp(&DMatrix::zeros(4, 4), 10, 1e-9);
        assert_eq!(res.x, vec![0.25; 4]);
        assert_eq!(res.objective(), 0.0);
    }
}
