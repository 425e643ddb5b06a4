//! Rectangular gridworld with four compass moves.
//!
//! The layout is plain text, one row per line, using `S` (start), `F`
//! (field), `H` (hole), `G` (goal) and `.` (plain). The reward of a move is
//! set by the class of the cell it enters. Entering the goal pays +1 and ends
//! the episode; moves off the grid leave the agent in place.
//!
//! The bundled 8×8 layout only approximates the published figure: starts
//! along the first row and column, goal in the bottom-right corner, a field
//! patch with holes in between.

use crate::error::{OpeError, Result};
use crate::mdp::{MdpTables, TabularMdp};

pub const DEFAULT_LAYOUT: &str = include_str!("../../data/gridworld_default.txt");
pub const DEFAULT_HORIZON: usize = 25;

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Start,
    Field,
    Hole,
    Goal,
    Plain,
}

impl Cell {
    pub fn reward(self) -> f64 {
        match self {
            Cell::Goal => 1.0,
            Cell::Field => -0.005,
            Cell::Hole => -0.5,
            Cell::Start | Cell::Plain => -0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub horizon: usize,
}

impl GridworldSpec {
    pub fn parse(layout: &str, horizon: usize) -> Result<Self> {
        let lines: Vec<&str> = layout.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if rows == 0 || cols == 0 {
            return Err(OpeError::InvalidLayout("layout is empty".into()));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(OpeError::InvalidLayout(format!("row {r} has {} cells, expected {cols}", line.len())));
            }
            for ch in line.chars() {
                cells.push(match ch {
                    'S' => Cell::Start,
                    'F' => Cell::Field,
                    'H' => Cell::Hole,
                    'G' => Cell::Goal,
                    '.' => Cell::Plain,
                    other => return Err(OpeError::InvalidLayout(format!("unknown cell {other:?} in row {r}"))),
                });
            }
        }
        let goals = cells.iter().filter(|c| **c == Cell::Goal).count();
        if goals != 1 {
            return Err(OpeError::InvalidLayout(format!("expected exactly one goal, found {goals}")));
        }
        if !cells.contains(&Cell::Start) {
            return Err(OpeError::InvalidLayout("no start cell".into()));
        }
        if horizon == 0 {
            return Err(OpeError::InvalidLayout("horizon must be positive".into()));
        }
        Ok(Self { rows, cols, cells, horizon })
    }

    pub fn default_layout() -> Self {
        Self::parse(DEFAULT_LAYOUT, DEFAULT_HORIZON).expect("bundled layout is valid")
    }

    pub fn absorbing_state(&self) -> usize {
        self.rows * self.cols
    }

    fn step(&self, cell: usize, action: usize) -> usize {
        let (r, c) = (cell / self.cols, cell % self.cols);
        let (r2, c2) = match action {
            UP if r > 0 => (r - 1, c),
            DOWN if r + 1 < self.rows => (r + 1, c),
            LEFT if c > 0 => (r, c - 1),
            RIGHT if c + 1 < self.cols => (r, c + 1),
            _ => (r, c),
        };
        r2 * self.cols + c2
    }
}

pub fn build_gridworld(spec: &GridworldSpec, gamma: f64) -> Result<TabularMdp> {
    let n_cells = spec.rows * spec.cols;
    let abs = spec.absorbing_state();
    let mut tables = MdpTables::empty(n_cells + 1, 4, abs, spec.horizon, gamma);
    let n_starts = spec.cells.iter().filter(|c| **c == Cell::Start).count() as f64;
    for (s, cell) in spec.cells.iter().enumerate() {
        if *cell == Cell::Start {
            tables.initial_dist[s] = 1.0 / n_starts;
        }
        if *cell == Cell::Goal {
            tables.make_terminal(s);
            continue;
        }
        for a in 0..4 {
            let next = spec.step(s, a);
            tables.set(s, a, next, 1.0, spec.cells[next].reward());
        }
    }
    TabularMdp::new(tables)
}
