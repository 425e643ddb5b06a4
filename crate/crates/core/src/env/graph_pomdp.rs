//! Graph with grouped observations.
//!
//! Depth-`t` states fall into time block `⌊t·H/T⌋`; with `hide_parity` the
//! odd and even state of a block share one observation. `H = T = 2` is the
//! Model-Fail domain.

use crate::env::graph::{build_graph, depth, GraphSpec};
use crate::error::{OpeError, Result};
use crate::mdp::TabularMdp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPomdpSpec {
    pub underlying: GraphSpec,
    /// Number of observable time blocks `H`.
    pub groups: usize,
    pub hide_parity: bool,
}

/// Total map from underlying states to observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMap {
    pub map: Vec<usize>,
    pub n_observations: usize,
    pub absorbing_observation: usize,
}

impl ObservationMap {
    #[inline]
    pub fn observe(&self, state: usize) -> usize {
        self.map[state]
    }
}

pub fn build_graph_pomdp(spec: &GraphPomdpSpec, gamma: f64) -> Result<(TabularMdp, ObservationMap)> {
    let t_max = spec.underlying.horizon;
    let h = spec.groups;
    if h == 0 || h > t_max {
        return Err(OpeError::InvalidConfig(format!("need 1 ≤ H ≤ T, got H={h}, T={t_max}")));
    }
    let mdp = build_graph(&spec.underlying, gamma)?;
    let abs = spec.underlying.absorbing_state();

    // observation key: (time block, parity or 0); ids assigned in state order
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut map = vec![0; mdp.n_states()];
    for s in 0..abs {
        let block = depth(s) * h / t_max;
        let parity = if spec.hide_parity { 0 } else { s % 2 };
        let key = (block, parity);
        map[s] = match keys.iter().position(|k| *k == key) {
            Some(id) => id,
            None => {
                keys.push(key);
                keys.len() - 1
            }
        };
    }
    let absorbing_observation = keys.len();
    map[abs] = absorbing_observation;
    Ok((mdp, ObservationMap { map, n_observations: absorbing_observation + 1, absorbing_observation }))
}
