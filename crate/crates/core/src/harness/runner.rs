//! Grid execution: one dataset per `(N, seed)` cell, every configured
//! estimator on it, then aggregation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::json;

use super::config::{BuiltEnv, ExperimentConfig, GroundTruth};
use super::metrics::policy_mismatch;
use super::report::{summarize, CellRecord, Summary};
use crate::data::{generate_dataset, Dataset};
use crate::direct::{
    am_fit, am_value, fqe, ih_estimate, ih_fit, lambda_backup, mrdr, q_reg, DirectConfig, LambdaVariant, QFit,
};
use crate::error::{OpeError, Result, Status};
use crate::hybrid::{dr, magic, wdr, MagicConfig};
use crate::ips::{ips_estimate, naive, IpsVariant};
use crate::policy::{estimate_behavior_policy, TabularPolicy};
use crate::weights::EvalContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DirectKind {
    Am,
    QReg,
    Mrdr,
    Fqe,
    Retrace,
    QPiLambda,
    Tree,
    Ih,
}

impl DirectKind {
    pub const ALL: [DirectKind; 8] = [
        Self::Am,
        Self::QReg,
        Self::Mrdr,
        Self::Fqe,
        Self::Retrace,
        Self::QPiLambda,
        Self::Tree,
        Self::Ih,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Am => "AM",
            Self::QReg => "Q-Reg",
            Self::Mrdr => "MRDR",
            Self::Fqe => "FQE",
            Self::Retrace => "R(lambda)",
            Self::QPiLambda => "Qpi(lambda)",
            Self::Tree => "Tree",
            Self::Ih => "IH",
        }
    }

    /// Whether the method yields a `Q̂` that hybrids can correct.
    pub fn produces_q(self) -> bool {
        self != Self::Ih
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HybridKind {
    Dr,
    Wdr,
    Magic,
}

impl HybridKind {
    pub const ALL: [HybridKind; 3] = [Self::Dr, Self::Wdr, Self::Magic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dr => "DR",
            Self::Wdr => "WDR",
            Self::Magic => "MAGIC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Ips(IpsVariant),
    Direct(DirectKind),
    Hybrid(HybridKind, DirectKind),
}

impl EstimatorId {
    /// Every estimator in report order: IPS, direct, then hybrids grouped by
    /// correction.
    pub fn all() -> Vec<Self> {
        let mut out: Vec<Self> = IpsVariant::ALL.iter().map(|v| Self::Ips(*v)).collect();
        out.extend(DirectKind::ALL.iter().map(|d| Self::Direct(*d)));
        for h in HybridKind::ALL {
            out.extend(DirectKind::ALL.iter().filter(|d| d.produces_q()).map(|d| Self::Hybrid(h, *d)));
        }
        out
    }

    pub fn class(self) -> &'static str {
        match self {
            Self::Ips(_) => "IPS",
            Self::Direct(_) => "DM",
            Self::Hybrid(..) => "HM",
        }
    }

    fn needs_rho(self) -> bool {
        !matches!(
            self,
            Self::Ips(IpsVariant::Naive)
                | Self::Direct(DirectKind::Am | DirectKind::Fqe | DirectKind::Tree | DirectKind::QPiLambda)
        )
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ips(v) => f.write_str(v.name()),
            Self::Direct(d) => f.write_str(d.name()),
            Self::Hybrid(h, d) => write!(f, "{}/{}", h.name(), d.name()),
        }
    }
}

impl FromStr for EstimatorId {
    type Err = OpeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| OpeError::InvalidConfig(format!("unknown estimator {s:?}")))
    }
}

/// Everything shared by the cells of one experiment.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    env: BuiltEnv,
    pi_b_sim: TabularPolicy,
    direct: DirectConfig,
    magic: MagicConfig,
    ids: Vec<EstimatorId>,
    label: String,
    horizon: usize,
    truth: f64,
    dump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Collect fitted Q/ω tables and MAGIC diagnostics.
    pub dump_q: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub env: String,
    pub horizon: usize,
    pub gamma: f64,
    pub true_value: f64,
    pub policy_mismatch: f64,
    pub records: Vec<CellRecord>,
    pub summary: Summary,
    /// JSON debugging dumps, present with [`RunOptions::dump_q`].
    pub dumps: Vec<serde_json::Value>,
}

/// `V(π_e)` by the configured ground-truth method, on the underlying MDP.
pub fn true_value(cfg: &ExperimentConfig, env: &BuiltEnv) -> Result<f64> {
    let pi_e = env.lift(&env.pi_e)?;
    match cfg.ground_truth {
        GroundTruth::Dp => env.mdp.exact_policy_value(&pi_e),
        GroundTruth::Mc => Ok(env.mdp.monte_carlo_value(&pi_e, cfg.mc_rollouts, cfg.mc_seed)?.mean),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let env = cfg.build_env()?;
    let truth = true_value(cfg, &env)?;
    let horizon = cfg.horizon()?;
    let setup = Setup {
        cfg,
        pi_b_sim: env.lift(&env.pi_b)?,
        direct: cfg.direct_config(),
        magic: cfg.magic.clone(),
        ids: cfg.estimator_ids()?,
        label: cfg.label(),
        horizon,
        truth,
        dump: opts.dump_q,
        env,
    };
    let seeds = cfg.seed_list();
    let cells: Vec<(usize, u64)> =
        cfg.n_trajectories.iter().flat_map(|n| seeds.iter().map(move |s| (*n, *s))).collect();
    let outputs: Vec<(Vec<CellRecord>, Vec<serde_json::Value>)> =
        cells.par_iter().map(|&(n, seed)| run_cell(&setup, n, seed)).collect();

    let mut records = Vec::new();
    let mut dumps = Vec::new();
    for (r, d) in outputs {
        records.extend(r);
        dumps.extend(d);
    }
    let summary = summarize(&records);
    Ok(ExperimentReport {
        env: setup.label.clone(),
        horizon,
        gamma: cfg.gamma,
        true_value: truth,
        policy_mismatch: policy_mismatch(&setup.env.pi_e, &setup.env.pi_b, horizon),
        records,
        summary,
        dumps,
    })
}

type Outcome = Result<(f64, Status)>;

fn run_cell(setup: &Setup<'_>, n: usize, seed: u64) -> (Vec<CellRecord>, Vec<serde_json::Value>) {
    let record = |id: EstimatorId, outcome: &Outcome| {
        let (estimate, status) = match outcome {
            Ok((v, _)) if !v.is_finite() => (f64::NAN, Status::Failed),
            Ok((v, s)) => (*v, *s),
            Err(e) => (f64::NAN, Status::from(e)),
        };
        CellRecord {
            env: setup.label.clone(),
            horizon: setup.horizon,
            gamma: setup.cfg.gamma,
            n,
            seed,
            estimator: id.to_string(),
            class: id.class().to_string(),
            estimate,
            true_value: setup.truth,
            status,
        }
    };
    let dataset = match build_dataset(setup, n, seed) {
        Ok(ds) => ds,
        Err(e) => {
            let failed: Outcome = Err(e);
            return (setup.ids.iter().map(|id| record(*id, &failed)).collect(), Vec::new());
        }
    };
    let mut cell = Cell::new(setup, &dataset);
    let records = setup.ids.iter().map(|id| record(*id, &cell.estimate(*id))).collect();
    (records, cell.dumps)
}

fn build_dataset(setup: &Setup<'_>, n: usize, seed: u64) -> Result<Dataset> {
    let raw = generate_dataset(&setup.env.mdp, &setup.pi_b_sim, n, seed)?;
    let ds = match &setup.env.observation {
        Some(obs) => raw.observe(&obs.map, obs.absorbing_observation, setup.env.pi_b.clone())?,
        None => raw,
    };
    if setup.cfg.pi_b_known {
        Ok(ds)
    } else {
        let estimated = estimate_behavior_policy(&ds, setup.cfg.behavior_smoothing)?;
        ds.with_behavior_policy(estimated, false)
    }
}

/// Lazily built per-cell state: the weight table and each direct fit are
/// computed at most once and shared by every estimator that needs them.
struct Cell<'a> {
    setup: &'a Setup<'a>,
    ds: &'a Dataset,
    ctx: Option<Result<EvalContext<'a>>>,
    fits: HashMap<DirectKind, Result<QFit>>,
    dumps: Vec<serde_json::Value>,
}

impl<'a> Cell<'a> {
    fn new(setup: &'a Setup<'a>, ds: &'a Dataset) -> Self {
        Self { setup, ds, ctx: None, fits: HashMap::new(), dumps: Vec::new() }
    }

    fn gamma(&self) -> f64 {
        self.setup.cfg.gamma
    }

    fn ctx(&mut self) -> Result<&EvalContext<'a>> {
        if self.ctx.is_none() {
            let (ds, setup) = (self.ds, self.setup);
            self.ctx = Some(EvalContext::new(ds, &setup.env.pi_e, ds.pi_b(), setup.cfg.gamma));
        }
        match self.ctx.as_ref().unwrap() {
            Ok(ctx) => Ok(ctx),
            Err(e) => Err(clone_error(e)),
        }
    }

    fn dump(&mut self, kind: &str, estimator: String, value: serde_json::Value) {
        if self.setup.dump {
            self.dumps.push(json!({
                "N": self.ds.len(),
                "seed": self.ds.seed(),
                "estimator": estimator,
                "kind": kind,
                "value": value,
            }));
        }
    }

    fn fit(&mut self, kind: DirectKind) -> Result<QFit> {
        if !self.fits.contains_key(&kind) {
            let fit = self.compute_fit(kind);
            if let Ok(f) = &fit {
                self.dump("q", kind.name().to_string(), f.q.to_json_matrix());
            }
            self.fits.insert(kind, fit);
        }
        match &self.fits[&kind] {
            Ok(f) => Ok(f.clone()),
            Err(e) => Err(clone_error(e)),
        }
    }

    fn compute_fit(&mut self, kind: DirectKind) -> Result<QFit> {
        let (ds, setup, gamma) = (self.ds, self.setup, self.gamma());
        let (pi_e, cfg) = (&setup.env.pi_e, &setup.direct);
        let lambda = |v: LambdaVariant| lambda_backup(v, ds, pi_e, ds.pi_b(), gamma, cfg);
        match kind {
            DirectKind::Am => {
                let model = am_fit(ds, gamma)?;
                Ok(QFit::closed_form(model.policy_q_values(pi_e)?))
            }
            DirectKind::Fqe => fqe(ds, pi_e, gamma, cfg),
            DirectKind::Retrace => lambda(LambdaVariant::Retrace),
            DirectKind::Tree => lambda(LambdaVariant::Tree),
            DirectKind::QPiLambda => lambda(LambdaVariant::QPiLambda),
            DirectKind::QReg => q_reg(self.ctx()?, cfg),
            DirectKind::Mrdr => mrdr(self.ctx()?, cfg),
            DirectKind::Ih => Err(OpeError::InvalidInput("IH does not produce a Q table".into())),
        }
    }

    fn estimate(&mut self, id: EstimatorId) -> Outcome {
        if id.needs_rho() {
            self.ctx()?;
        }
        match id {
            EstimatorId::Ips(IpsVariant::Naive) => Ok((naive(self.ds, self.gamma()), Status::Ok)),
            EstimatorId::Ips(v) => Ok((ips_estimate(v, self.ctx()?)?, Status::Ok)),
            EstimatorId::Direct(DirectKind::Am) => {
                let model = am_fit(self.ds, self.gamma())?;
                let v = am_value(&model, &self.setup.env.pi_e, self.setup.direct.am_eval, self.ds.seed())?;
                Ok((v, Status::Ok))
            }
            EstimatorId::Direct(DirectKind::Ih) => {
                let cfg = self.setup.direct.clone();
                let ctx = self.ctx()?;
                let omega = ih_fit(ctx, &cfg)?;
                let v = ih_estimate(ctx, &omega)?;
                self.dump("omega", "IH".into(), omega.to_json_matrix());
                Ok((v, Status::Ok))
            }
            EstimatorId::Direct(kind) => {
                let fit = self.fit(kind)?;
                Ok((fit.q.dm_value(self.ds, &self.setup.env.pi_e), fit_status(&fit)))
            }
            EstimatorId::Hybrid(h, kind) => {
                let fit = self.fit(kind)?;
                let base = fit_status(&fit);
                let magic_cfg = self.setup.magic.clone();
                let ctx = self.ctx()?;
                match h {
                    HybridKind::Dr => Ok((dr(ctx, &fit.q)?, base)),
                    HybridKind::Wdr => Ok((wdr(ctx, &fit.q)?, base)),
                    HybridKind::Magic => {
                        let res = magic(ctx, &fit.q, &magic_cfg)?;
                        let status = if res.qp.converged { base } else { Status::NonConvergence };
                        let estimate = res.estimate;
                        if self.setup.dump {
                            let value = serde_json::to_value(&res).unwrap_or(serde_json::Value::Null);
                            self.dump("magic", id.to_string(), value);
                        }
                        Ok((estimate, status))
                    }
                }
            }
        }
    }
}

fn fit_status(fit: &QFit) -> Status {
    if fit.converged {
        Status::Ok
    } else {
        Status::NonConvergence
    }
}

/// Cached failures are replayed for every estimator that depends on them.
fn clone_error(e: &OpeError) -> OpeError {
    match e {
        OpeError::SupportViolation { trajectory, step, state, action } => OpeError::SupportViolation {
            trajectory: *trajectory,
            step: *step,
            state: *state,
            action: *action,
        },
        OpeError::DegenerateWeights(m) => OpeError::DegenerateWeights(m.clone()),
        OpeError::NonConvergence { iterations, residual } => {
            OpeError::NonConvergence { iterations: *iterations, residual: *residual }
        }
        OpeError::Solver(m) => OpeError::Solver(m.clone()),
        other => OpeError::InvalidInput(other.to_string()),
    }
}
