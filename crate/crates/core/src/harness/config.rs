//! Experiment configuration, read from TOML.
//!
//! ```toml
//! gamma = 0.99
//! horizon = 250
//! n_trajectories = [256, 1024]
//! n_seeds = 10
//! estimators = ["IS", "WIS", "NAIVE"]
//!
//! [env]
//! kind = "graph_mc"
//!
//! [behavior]
//! kind = "static"
//! p0 = 0.5
//!
//! [evaluation]
//! kind = "static"
//! p0 = 0.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::EstimatorId;
use crate::direct::{AmEval, DirectConfig};
use crate::env::{
    build_graph, build_graph_mc, build_graph_pomdp, build_gridworld, graph_mc, gridworld, GraphMcSpec, GraphPomdpSpec,
    GraphSpec, GridworldSpec, ObservationMap,
};
use crate::error::{OpeError, Result};
use crate::hybrid::MagicConfig;
use crate::mdp::TabularMdp;
use crate::policy::TabularPolicy;
use crate::qtable::QTable;
use crate::rng::draw_seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Graph,
    GraphPomdp,
    GraphMc,
    Gridworld,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Graph => "graph",
            EnvKind::GraphPomdp => "graph_pomdp",
            EnvKind::GraphMc => "graph_mc",
            EnvKind::Gridworld => "gridworld",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    #[serde(default)]
    pub stochastic_env: bool,
    #[serde(default)]
    pub stochastic_rewards: bool,
    #[serde(default)]
    pub sparse_rewards: bool,
    /// Observation blocks `H` for the POMDP.
    #[serde(default)]
    pub groups: Option<usize>,
    #[serde(default = "default_true")]
    pub hide_parity: bool,
    /// Gridworld layout file, relative to the config file.
    #[serde(default)]
    pub layout: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// `π(a=0) = p0` everywhere (two-action environments).
    Static { p0: f64 },
    /// ε-greedy with respect to the optimal Q of the environment.
    EpsGreedy { eps: f64 },
    Uniform,
}

impl PolicySpec {
    pub fn describe(&self) -> String {
        match self {
            PolicySpec::Static { p0 } => format!("static(p0={p0})"),
            PolicySpec::EpsGreedy { eps } => format!("eps_greedy(eps={eps})"),
            PolicySpec::Uniform => "uniform".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    #[default]
    Dp,
    Mc,
}

/// Per-field overrides of the environment's default [`DirectConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DirectOverrides {
    pub fqe_eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub lambda: Option<f64>,
    pub reg_omega: Option<f64>,
    pub ih_reg: Option<f64>,
    pub am_eval: Option<AmEval>,
    pub mrdr_per_decision: Option<bool>,
}

impl DirectOverrides {
    pub fn apply(&self, base: DirectConfig) -> DirectConfig {
        DirectConfig {
            fqe_eps: self.fqe_eps.unwrap_or(base.fqe_eps),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            lambda: self.lambda.unwrap_or(base.lambda),
            reg_omega: self.reg_omega.unwrap_or(base.reg_omega),
            ih_reg: self.ih_reg.unwrap_or(base.ih_reg),
            am_eval: self.am_eval.unwrap_or(base.am_eval),
            mrdr_per_decision: self.mrdr_per_decision.unwrap_or(base.mrdr_per_decision),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment name used in reports; defaults to the env kind.
    #[serde(default)]
    pub label: Option<String>,
    pub gamma: f64,
    /// Required for the graph environments; the others have defaults.
    #[serde(default)]
    pub horizon: Option<usize>,
    pub n_trajectories: Vec<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default = "default_true")]
    pub pi_b_known: bool,
    #[serde(default = "default_smoothing")]
    pub behavior_smoothing: f64,
    /// Estimator names; all of them when absent.
    #[serde(default)]
    pub estimators: Option<Vec<String>>,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    #[serde(default = "default_mc_rollouts")]
    pub mc_rollouts: usize,
    #[serde(default)]
    pub mc_seed: u64,
    pub env: EnvConfig,
    pub behavior: PolicySpec,
    pub evaluation: PolicySpec,
    #[serde(default)]
    pub direct: DirectOverrides,
    #[serde(default)]
    pub magic: MagicConfig,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_n_seeds() -> usize {
    10
}
fn default_smoothing() -> f64 {
    1.0
}
fn default_mc_rollouts() -> usize {
    10_000
}

/// An environment ready to simulate, plus what the estimators see.
#[derive(Debug, Clone)]
pub struct BuiltEnv {
    pub mdp: TabularMdp,
    pub observation: Option<ObservationMap>,
    /// Behavior and evaluation policies over observed states.
    pub pi_b: TabularPolicy,
    pub pi_e: TabularPolicy,
}

impl BuiltEnv {
    /// `pi` lifted from observations to the underlying states.
    pub fn lift(&self, pi: &TabularPolicy) -> Result<TabularPolicy> {
        match &self.observation {
            None => Ok(pi.clone()),
            Some(obs) => {
                let rows: Vec<Vec<f64>> = obs.map.iter().map(|o| pi.row(*o).to_vec()).collect();
                TabularPolicy::from_rows(&rows)
            }
        }
    }

    pub fn n_observed_states(&self) -> usize {
        self.observation.as_ref().map_or(self.mdp.n_states(), |o| o.n_observations)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.env.kind.name().to_string())
    }

    pub fn horizon(&self) -> Result<usize> {
        match (self.horizon, self.env.kind) {
            (Some(t), _) => Ok(t),
            (None, EnvKind::GraphMc) => Ok(graph_mc::DEFAULT_HORIZON),
            (None, EnvKind::Gridworld) => Ok(gridworld::DEFAULT_HORIZON),
            (None, kind) => Err(OpeError::InvalidConfig(format!("horizon is required for {}", kind.name()))),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => draw_seeds(self.root_seed, self.n_seeds),
        }
    }

    pub fn direct_config(&self) -> DirectConfig {
        let base = match self.env.kind {
            EnvKind::Gridworld => DirectConfig::gridworld(),
            _ => DirectConfig::default(),
        };
        self.direct.apply(base)
    }

    pub fn estimator_ids(&self) -> Result<Vec<EstimatorId>> {
        match &self.estimators {
            None => Ok(EstimatorId::all()),
            Some(names) => names.iter().map(|n| n.parse()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OpeError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma = {} is not in (0, 1]", self.gamma));
        }
        let t = self.horizon()?;
        if t == 0 {
            return bad("horizon must be positive".into());
        }
        if self.n_trajectories.is_empty() || self.n_trajectories.contains(&0) {
            return bad("n_trajectories must be a non-empty list of positive counts".into());
        }
        let seeds = self.seed_list();
        if seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.behavior_smoothing >= 0.0) {
            return bad("behavior_smoothing must be non-negative".into());
        }
        if self.ground_truth == GroundTruth::Mc && self.mc_rollouts == 0 {
            return bad("mc_rollouts must be positive".into());
        }
        self.estimator_ids()?;
        self.direct_config().validate()?;
        self.magic.validate()?;
        if let Some(js) = &self.magic.j {
            MagicConfig { j: Some(js.clone()), ..self.magic.clone() }.switch_indices(t)?;
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<BuiltEnv> {
        let t = self.horizon()?;
        let graph_spec = GraphSpec {
            horizon: t,
            stochastic_env: self.env.stochastic_env,
            stochastic_rewards: self.env.stochastic_rewards,
            sparse_rewards: self.env.sparse_rewards,
        };
        let (mdp, observation) = match self.env.kind {
            EnvKind::Graph => (build_graph(&graph_spec, self.gamma)?, None),
            EnvKind::GraphPomdp => {
                let groups = self.env.groups.unwrap_or(t);
                let spec = GraphPomdpSpec { underlying: graph_spec, groups, hide_parity: self.env.hide_parity };
                let (mdp, obs) = build_graph_pomdp(&spec, self.gamma)?;
                (mdp, Some(obs))
            }
            EnvKind::GraphMc => (build_graph_mc(&GraphMcSpec { horizon: t }, self.gamma)?, None),
            EnvKind::Gridworld => {
                let spec = match &self.env.layout {
                    None => GridworldSpec::parse(gridworld::DEFAULT_LAYOUT, t)?,
                    Some(p) => {
                        let path = match &self.base_dir {
                            Some(dir) if p.is_relative() => dir.join(p),
                            _ => p.clone(),
                        };
                        GridworldSpec::parse(&std::fs::read_to_string(path)?, t)?
                    }
                };
                (build_gridworld(&spec, self.gamma)?, None)
            }
        };
        let optimal = match self.env.kind {
            EnvKind::GraphPomdp => None,
            _ => Some(mdp.optimal_q_values()),
        };
        let n_obs = observation.as_ref().map_or(mdp.n_states(), |o| o.n_observations);
        let pi_b = build_policy(&self.behavior, n_obs, mdp.n_actions(), optimal.as_ref())?;
        let pi_e = build_policy(&self.evaluation, n_obs, mdp.n_actions(), optimal.as_ref())?;
        Ok(BuiltEnv { mdp, observation, pi_b, pi_e })
    }
}

fn build_policy(spec: &PolicySpec, n_states: usize, n_actions: usize, q: Option<&QTable>) -> Result<TabularPolicy> {
    match spec {
        PolicySpec::Static { p0 } => {
            if n_actions != 2 {
                return Err(OpeError::InvalidConfig("static policies need a two-action environment".into()));
            }
            TabularPolicy::static_binary(n_states, *p0)
        }
        PolicySpec::EpsGreedy { eps } => match q {
            Some(q) => TabularPolicy::eps_greedy(q, *eps),
            None => Err(OpeError::InvalidConfig("eps_greedy policies need a fully observed environment".into())),
        },
        PolicySpec::Uniform => Ok(TabularPolicy::uniform(n_states, n_actions)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH_MC: &str = r#"
        gamma = 0.99
        n_trajectories = [8]
        n_seeds = 3
        [env]
        kind = "graph_mc"
        [behavior]
        kind = "static"
        p0 = 0.5
        [evaluation]
        kind = "static"
        p0 = 0.5
    "#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(GRAPH_MC).unwrap();
        assert_eq!(cfg.horizon().unwrap(), 250);
        assert_eq!(cfg.seed_list().len(), 3);
        assert_eq!(cfg.ground_truth, GroundTruth::Dp);
        assert_eq!(cfg.estimator_ids().unwrap().len(), EstimatorId::all().len());
        let env = cfg.build_env().unwrap();
        assert_eq!(env.mdp.n_states(), 23);
        assert_eq!(cfg.label(), "graph_mc");
    }

    #[test]
    fn rejects_bad_configs() {
        let with = |extra: &str| ExperimentConfig::from_toml_str(&format!("{extra}\n{GRAPH_MC}"));
        assert!(with("unknown_key = 1").is_err());
        assert!(with("seeds = [1, 1, 2]").is_err());
        assert!(with(r#"estimators = ["IS", "BOGUS"]"#).is_err());
        let graph = GRAPH_MC.replace("graph_mc", "graph");
        assert!(ExperimentConfig::from_toml_str(&graph).is_err(), "graph needs a horizon");
    }

    #[test]
    fn gridworld_uses_its_own_direct_defaults() {
        let text = r#"
            gamma = 0.98
            n_trajectories = [4]
            [env]
            kind = "gridworld"
            [behavior]
            kind = "eps_greedy"
            eps = 0.5
            [evaluation]
            kind = "eps_greedy"
            eps = 0.1
            [direct]
            lambda = 0.5
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let d = cfg.direct_config();
        assert_eq!((d.fqe_eps, d.max_iter, d.lambda), (4e-4, 50, 0.5));
        let env = cfg.build_env().unwrap();
        assert_eq!(env.pi_b.n_actions(), 4);
    }
}
