//! Blending partial-horizon WDR estimates by estimated MSE.
//!
//! For a switch index `j`, `g_j` keeps the weighted corrections up to step
//! `j` and trusts the model after it:
//!
//! `g_j = Σ_i [ Σ_{t≤j} γ^t (w^i_t (r − Q̂(x_t,a_t)) + w^i_{t−1} V̂(x_t)) + γ^{j+1} w^i_j V̂(x_{j+1}) ]`
//!
//! with `w^i_t = ρ^i_{0:t} / Σ_k ρ^k_{0:t}` and `w_{−1} = 1/N`. The trailing
//! term uses the weight of step `j`, the index at which the model takes over.
//! Then `g_{−1}` is the DM value and `g_{T−1}` is WDR.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::simplex::{solve_simplex_qp, QpResult};
use super::{normalizers, Corrections};
use crate::error::{OpeError, Result};
use crate::qtable::QTable;
use crate::rng::{stream, BOOTSTRAP_STREAM};
use crate::weights::EvalContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// Percentile bootstrap over trajectories.
    #[default]
    Bootstrap,
    /// `g_{T−1} ± z σ̂` with `σ̂² = Ω̂_{T−1,T−1}`.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagicConfig {
    /// Switch indices in `−1..=T−1`; `None` means all of them.
    pub j: Option<Vec<i64>>,
    pub bootstrap_b: usize,
    pub ci_level: f64,
    pub ci_method: CiMethod,
    pub qp_iters: usize,
    pub qp_tol: f64,
    pub psd_eps: f64,
}

impl Default for MagicConfig {
    fn default() -> Self {
        Self {
            j: None,
            bootstrap_b: 200,
            ci_level: 0.5,
            ci_method: CiMethod::Bootstrap,
            qp_iters: 10_000,
            qp_tol: 1e-9,
            psd_eps: 1e-9,
        }
    }
}

impl MagicConfig {
    pub fn switch_indices(&self, horizon: usize) -> Result<Vec<i64>> {
        let last = horizon as i64 - 1;
        let js = match &self.j {
            None => (-1..=last).collect(),
            Some(js) => js.clone(),
        };
        if js.is_empty() {
            return Err(OpeError::InvalidConfig("MAGIC switch set is empty".into()));
        }
        if js.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OpeError::InvalidConfig("MAGIC switch set must be strictly increasing".into()));
        }
        if js[0] < -1 || *js.last().unwrap() != last {
            return Err(OpeError::InvalidConfig(format!("MAGIC switch set must lie in -1..={last} and end at {last}")));
        }
        Ok(js)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(OpeError::InvalidConfig("ci_level must lie in (0, 1)".into()));
        }
        if self.ci_method == CiMethod::Bootstrap && self.bootstrap_b == 0 {
            return Err(OpeError::InvalidConfig("bootstrap_b must be positive".into()));
        }
        if self.qp_iters == 0 || !(self.qp_tol > 0.0) || !(self.psd_eps >= 0.0) {
            return Err(OpeError::InvalidConfig("invalid QP settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GVector {
    pub j: Vec<i64>,
    pub g: Vec<f64>,
    /// `contributions[i][k]`: trajectory `i`'s share of `g[k]`.
    pub contributions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagicResult {
    pub estimate: f64,
    pub g: GVector,
    pub bias: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ci: (f64, f64),
    pub qp: QpResult,
}

/// Builds `g_j` for every `j` in `js`.
pub fn g_vector(ctx: &EvalContext<'_>, q: &QTable, js: &[i64]) -> Result<GVector> {
    let corr = Corrections::new(ctx, q)?;
    let norms = normalizers(ctx)?;
    let n = ctx.n() as f64;
    let mut contributions = Vec::with_capacity(ctx.n());
    for (i, terms) in corr.terms.iter().enumerate() {
        let mut row = Vec::with_capacity(js.len());
        let mut partial = corr.start[i] / n;
        let mut t = 0usize;
        for &j in js {
            while (t as i64) <= j {
                partial += (ctx.rho.cum(i, t) / norms[t]) * terms[t];
                t += 1;
            }
            row.push(partial);
        }
        contributions.push(row);
    }
    let g = (0..js.len()).map(|k| contributions.iter().map(|c| c[k]).sum()).collect();
    Ok(GVector { j: js.to_vec(), g, contributions })
}

/// `n/(n−1) Σ_i (c_i − c̄)(c_i − c̄)ᵀ`; zero for a single trajectory.
fn covariance(contributions: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    let n = contributions.len();
    let mut cov = DMatrix::zeros(dim, dim);
    if n < 2 {
        return cov;
    }
    let mean: Vec<f64> = (0..dim).map(|k| contributions.iter().map(|c| c[k]).sum::<f64>() / n as f64).collect();
    for c in contributions {
        let d = DVector::from_iterator(dim, c.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &d * d.transpose();
    }
    cov * (n as f64 / (n - 1) as f64)
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile-bootstrap interval of the WDR estimate, resampling whole
/// trajectories. Resamples whose weights vanish at some step are dropped.
fn bootstrap_ci(ctx: &EvalContext<'_>, corr: &Corrections, cfg: &MagicConfig) -> Option<(f64, f64)> {
    let n = ctx.n();
    let t_max = ctx.horizon();
    let mut rng = stream(ctx.dataset.seed(), BOOTSTRAP_STREAM);
    let mut values = Vec::with_capacity(cfg.bootstrap_b);
    let mut num = vec![0.0; t_max];
    let mut den = vec![0.0; t_max];
    for _ in 0..cfg.bootstrap_b {
        num.iter_mut().for_each(|x| *x = 0.0);
        den.iter_mut().for_each(|x| *x = 0.0);
        let mut dm = 0.0;
        for _ in 0..n {
            let i = rng.random_range(0..n);
            dm += corr.start[i];
            for t in 0..t_max {
                let w = ctx.rho.cum(i, t);
                num[t] += w * corr.terms[i][t];
                den[t] += w;
            }
        }
        if den.iter().any(|d| *d <= 0.0) {
            continue;
        }
        values.push(dm / n as f64 + num.iter().zip(&den).map(|(a, b)| a / b).sum::<f64>());
    }
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.ci_level) / 2.0;
    Some((quantile(&values, alpha), quantile(&values, 1.0 - alpha)))
}

pub fn magic(ctx: &EvalContext<'_>, q: &QTable, cfg: &MagicConfig) -> Result<MagicResult> {
    cfg.validate()?;
    let js = cfg.switch_indices(ctx.horizon())?;
    let g = g_vector(ctx, q, &js)?;
    let dim = js.len();
    let cov = covariance(&g.contributions, dim);
    let wdr = *g.g.last().unwrap();

    let ci = match cfg.ci_method {
        CiMethod::Bootstrap => {
            let corr = Corrections::new(ctx, q)?;
            bootstrap_ci(ctx, &corr, cfg).unwrap_or((wdr, wdr))
        }
        CiMethod::Normal => {
            let z = Normal::standard().inverse_cdf(0.5 + cfg.ci_level / 2.0);
            let sd = cov[(dim - 1, dim - 1)].max(0.0).sqrt();
            (wdr - z * sd, wdr + z * sd)
        }
    };
    let bias: Vec<f64> = g
        .g
        .iter()
        .map(|v| {
            if *v < ci.0 {
                ci.0 - v
            } else if *v > ci.1 {
                v - ci.1
            } else {
                0.0
            }
        })
        .collect();

    let b = DVector::from_vec(bias.clone());
    let mut m = &cov + &b * b.transpose();
    for k in 0..dim {
        m[(k, k)] += cfg.psd_eps;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(OpeError::DegenerateWeights("MAGIC error matrix is not finite".into()));
    }
    let qp = solve_simplex_qp(&m, cfg.qp_iters, cfg.qp_tol);
    let estimate = qp.x.iter().zip(&g.g).map(|(x, v)| x * v).sum();
    let covariance = cov.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(MagicResult { estimate, g, bias, covariance, ci, qp })
}
