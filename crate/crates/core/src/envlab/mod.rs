//! A small gridworld with indicator features, an exact planner and rollouts.
//!
//! World files hold `key: value` lines, a `---` separator and the grid, one
//! character per cell: `.` empty, `S` empty start cell, `G` goal, `H` hazard,
//! `#` wall. Goal and hazard cells end the episode. Moving off the grid or into
//! a wall leaves the agent in place.

mod pipeline;
mod planning;
mod sim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pipeline::{end_to_end, graded_trajectories, PipelineConfig, PipelineReport};
pub use planning::{evaluate_policy, value_iteration, TabularPolicy, DEFAULT_TOLERANCE};
pub use sim::{rollout, simulate, success_rate, success_rate_with_exploration, Episode, Outcome};

pub const OPEN7: &str = include_str!("../../fixtures/open7.grid");
pub const HAZARD_CORRIDOR: &str = include_str!("../../fixtures/hazard_corridor.grid");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    /// Enumeration order, also used to break planning ties.
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn perpendicular(self) -> [Action; 2] {
        match self {
            Action::Up | Action::Down => [Action::Left, Action::Right],
            Action::Left | Action::Right => [Action::Up, Action::Down],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Goal,
    Hazard,
    Wall,
}

impl Cell {
    pub fn is_terminal(self) -> bool {
        matches!(self, Cell::Goal | Cell::Hazard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// reached_goal, entered_hazard, step, toward_goal, away_from_goal, wall_bump
    Standard,
    /// reached_goal, entered_hazard, step
    Minimal,
}

impl FeatureSet {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            FeatureSet::Standard => &[
                "reached_goal",
                "entered_hazard",
                "step",
                "toward_goal",
                "away_from_goal",
                "wall_bump",
            ],
            FeatureSet::Minimal => &["reached_goal", "entered_hazard", "step"],
        }
    }

    pub fn dim(self) -> usize {
        self.names().len()
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(FeatureSet::Standard),
            "minimal" => Ok(FeatureSet::Minimal),
            other => Err(Error::InvalidWorld(format!("unknown feature set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gridworld {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    starts: Vec<usize>,
    gamma: f64,
    slip: f64,
    features: FeatureSet,
    max_steps: usize,
    goal_distance: Vec<usize>,
}

/// One possible outcome of taking an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub probability: f64,
    pub next: usize,
    pub bumped: bool,
}

impl Gridworld {
    pub fn open7() -> Self {
        OPEN7.parse().expect("shipped fixture parses")
    }

    pub fn hazard_corridor() -> Self {
        HAZARD_CORRIDOR.parse().expect("shipped fixture parses")
    }

    pub fn new(
        rows: &[&str],
        gamma: f64,
        slip: f64,
        features: FeatureSet,
        max_steps: usize,
    ) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 {
            return Err(Error::InvalidWorld("empty grid".into()));
        }
        let mut cells = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::InvalidWorld(format!(
                    "grid row {r} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            for ch in row.chars() {
                let cell = match ch {
                    '.' => Cell::Empty,
                    'S' => {
                        starts.push(cells.len());
                        Cell::Empty
                    }
                    'G' => Cell::Goal,
                    'H' => Cell::Hazard,
                    '#' => Cell::Wall,
                    other => {
                        return Err(Error::InvalidWorld(format!("unknown cell `{other}` in row {r}")))
                    }
                };
                cells.push(cell);
            }
        }
        if !cells.contains(&Cell::Goal) {
            return Err(Error::InvalidWorld("no goal cell".into()));
        }
        if starts.is_empty() {
            return Err(Error::InvalidWorld("no start cell".into()));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidWorld(format!("gamma {gamma} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidWorld(format!("slip {slip} outside [0, 1]")));
        }
        if max_steps == 0 {
            return Err(Error::InvalidWorld("max_steps must be >= 1".into()));
        }
        let goals: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Goal).collect();
        let goal_distance = (0..cells.len())
            .map(|i| {
                let (r, c) = (i / width, i % width);
                goals
                    .iter()
                    .map(|&g| r.abs_diff(g / width) + c.abs_diff(g % width))
                    .min()
                    .expect("at least one goal")
            })
            .collect();
        Ok(Self {
            width,
            height,
            cells,
            starts,
            gamma,
            slip,
            features,
            max_steps,
            goal_distance,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, index: usize) -> Cell {
        self.cells[index]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn slip(&self) -> f64 {
        self.slip
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidWorld(format!("gamma {gamma} outside [0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_slip(mut self, slip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidWorld(format!("slip {slip} outside [0, 1]")));
        }
        self.slip = slip;
        Ok(self)
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidWorld("max_steps must be >= 1".into()));
        }
        self.max_steps = max_steps;
        Ok(self)
    }

    /// Cells where an agent can act: not a wall and not terminal.
    pub fn is_decision_cell(&self, index: usize) -> bool {
        !matches!(self.cells[index], Cell::Wall) && !self.cells[index].is_terminal()
    }

    /// Where `action` leads from `from` without slipping, and whether it bumped.
    pub fn step_target(&self, from: usize, action: Action) -> (usize, bool) {
        let (r, c) = self.position(from);
        let (dr, dc) = action.offset();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            return (from, true);
        }
        let next = self.index(nr as usize, nc as usize);
        if self.cells[next] == Cell::Wall {
            (from, true)
        } else {
            (next, false)
        }
    }

    /// The intended move with probability `1 − slip`, each perpendicular move with `slip / 2`.
    pub fn transitions(&self, from: usize, action: Action) -> Vec<Transition> {
        let mut out = Vec::with_capacity(3);
        let (next, bumped) = self.step_target(from, action);
        out.push(Transition {
            probability: 1.0 - self.slip,
            next,
            bumped,
        });
        if self.slip > 0.0 {
            for side in action.perpendicular() {
                let (next, bumped) = self.step_target(from, side);
                out.push(Transition {
                    probability: self.slip / 2.0,
                    next,
                    bumped,
                });
            }
        }
        out
    }

    /// Feature vector of moving from `from` to `to`.
    pub fn features(&self, from: usize, to: usize, bumped: bool) -> Vec<f64> {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let mut phi = vec![
            ind(self.cells[to] == Cell::Goal),
            ind(self.cells[to] == Cell::Hazard),
            1.0,
        ];
        if self.features == FeatureSet::Standard {
            let (d0, d1) = (self.goal_distance[from], self.goal_distance[to]);
            phi.extend([ind(d1 < d0), ind(d1 > d0), ind(bumped)]);
        }
        phi
    }

    /// Manhattan distance to the nearest goal.
    pub fn goal_distance(&self, index: usize) -> usize {
        self.goal_distance[index]
    }
}

impl FromStr for Gridworld {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (head, grid) = text
            .split_once("\n---")
            .ok_or_else(|| Error::InvalidWorld("missing `---` separator".into()))?;
        let mut width = None;
        let mut height = None;
        let mut gamma = 0.95;
        let mut slip = 0.0;
        let mut features = FeatureSet::Standard;
        let mut max_steps = 50;
        for line in head.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once(':')
                .or_else(|| line.split_once('='))
                .ok_or_else(|| Error::InvalidWorld(format!("malformed header line `{line}`")))?;
            let value = value.trim();
            let bad = |e: &dyn fmt::Display| Error::InvalidWorld(format!("{}: {e}", key.trim()));
            match key.trim() {
                "width" => width = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "height" => height = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "gamma" => gamma = value.parse().map_err(|e| bad(&e))?,
                "slip" => slip = value.parse().map_err(|e| bad(&e))?,
                "features" => features = value.parse()?,
                "max_steps" => max_steps = value.parse().map_err(|e| bad(&e))?,
                other => return Err(Error::InvalidWorld(format!("unknown header key `{other}`"))),
            }
        }
        let rows: Vec<&str> = grid
            .lines()
            .skip(1)
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let world = Gridworld::new(&rows, gamma, slip, features, max_steps)?;
        if width.is_some_and(|w| w != world.width) || height.is_some_and(|h| h != world.height) {
            return Err(Error::InvalidWorld(format!(
                "header says {}x{}, grid is {}x{}",
                width.unwrap_or(world.width),
                height.unwrap_or(world.height),
                world.width,
                world.height
            )));
        }
        Ok(world)
    }
}
