//! Tabular benchmark environments and policy builders.

pub mod graph;
pub mod graph_mc;
pub mod graph_pomdp;
pub mod gridworld;

pub use graph::{build_graph, GraphSpec};
pub use graph_mc::{build_graph_mc, GraphMcSpec};
pub use graph_pomdp::{build_graph_pomdp, GraphPomdpSpec, ObservationMap};
pub use gridworld::{build_gridworld, GridworldSpec};

use crate::error::Result;
use crate::mdp::TabularMdp;
use crate::policy::TabularPolicy;
use crate::qtable::QTable;

/// Optimal action values of `mdp` over its horizon.
pub fn value_iteration(mdp: &TabularMdp) -> QTable {
    mdp.optimal_q_values()
}

pub fn eps_greedy(q: &QTable, eps: f64) -> Result<TabularPolicy> {
    TabularPolicy::eps_greedy(q, eps)
}

/// `π(a=0) = p0` in every state of a two-action environment.
pub fn static_policy(n_states: usize, p0: f64) -> Result<TabularPolicy> {
    TabularPolicy::static_binary(n_states, p0)
}
