//! One-dimensional graph version of Mountain Car.
//!
//! Positions `−10..=+11` map to states `0..=21`, the absorbing state is 22.
//! Start at position 0. Action 0 moves right, action 1 moves left; moving
//! left at −10 stays put. Every step pays −1 except the one that enters +11,
//! which pays 0 and ends the episode.

use crate::error::Result;
use crate::mdp::{MdpTables, TabularMdp};

pub const LEFT_EDGE: i64 = -10;
pub const GOAL: i64 = 11;
pub const DEFAULT_HORIZON: usize = 250;
pub const RIGHT: usize = 0;
pub const LEFT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphMcSpec {
    pub horizon: usize,
}

impl Default for GraphMcSpec {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON }
    }
}

pub fn state_of(position: i64) -> usize {
    (position - LEFT_EDGE) as usize
}

pub fn position_of(state: usize) -> i64 {
    state as i64 + LEFT_EDGE
}

pub fn build_graph_mc(spec: &GraphMcSpec, gamma: f64) -> Result<TabularMdp> {
    let n_positions = (GOAL - LEFT_EDGE + 1) as usize;
    let abs = n_positions;
    let mut tables = MdpTables::empty(n_positions + 1, 2, abs, spec.horizon, gamma);
    tables.initial_dist[state_of(0)] = 1.0;
    for s in 0..n_positions {
        let x = position_of(s);
        if x == GOAL {
            tables.make_terminal(s);
            continue;
        }
        for (a, dx) in [(RIGHT, 1), (LEFT, -1)] {
            let next = (x + dx).max(LEFT_EDGE);
            let reward = if next == GOAL { 0.0 } else { -1.0 };
            tables.set(s, a, state_of(next), 1.0, reward);
        }
    }
    TabularMdp::new(tables)
}
