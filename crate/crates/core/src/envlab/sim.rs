use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Action, Cell, Gridworld, TabularPolicy};
use crate::error::{Error, Result};
use crate::reward::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Goal,
    Hazard,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Goal => "goal",
            Outcome::Hazard => "hazard",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: Trajectory,
    /// Action chosen at each step, before any slip.
    pub actions: Vec<Action>,
    /// Cells visited, starting cell first.
    pub cells: Vec<usize>,
    pub outcome: Outcome,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::param("exploration_rate", format!("{rate} outside [0, 1]")));
    }
    Ok(())
}

fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

fn run_episode(
    world: &Gridworld,
    policy: &TabularPolicy,
    exploration_rate: f64,
    seed: u64,
    episode: usize,
) -> Episode {
    let mut rng = episode_rng(seed, episode);
    let starts = world.starts();
    let mut cell = starts[rng.random_range(0..starts.len())];
    let mut cells = vec![cell];
    let mut actions = Vec::new();
    let mut steps = Vec::new();
    let mut outcome = Outcome::Timeout;
    for _ in 0..world.max_steps() {
        let action = match policy.action(cell) {
            Some(a) if !rng.random_bool(exploration_rate) => a,
            _ => Action::ALL[rng.random_range(0..4)],
        };
        let transitions = world.transitions(cell, action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = transitions[transitions.len() - 1];
        for t in &transitions {
            acc += t.probability;
            if u < acc {
                chosen = *t;
                break;
            }
        }
        steps.push(world.features(cell, chosen.next, chosen.bumped));
        actions.push(action);
        cell = chosen.next;
        cells.push(cell);
        match world.cell(cell) {
            Cell::Goal => {
                outcome = Outcome::Goal;
                break;
            }
            Cell::Hazard => {
                outcome = Outcome::Hazard;
                break;
            }
            _ => {}
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("outcome".to_string(), outcome.name().to_string());
    metadata.insert("exploration_rate".to_string(), exploration_rate.to_string());
    let trajectory = Trajectory::with_metadata(format!("ep{seed}-{episode:04}"), steps, metadata)
        .expect("rollouts emit at least one finite step");
    Episode {
        trajectory,
        actions,
        cells,
        outcome,
    }
}

/// `count` episodes with uniform exploration at `exploration_rate`. Episode
/// `i` draws from its own stream of `seed`, so results do not depend on
/// scheduling.
pub fn simulate(
    world: &Gridworld,
    policy: &TabularPolicy,
    exploration_rate: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<Episode>> {
    check_rate(exploration_rate)?;
    if policy.actions.len() != world.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: world.num_cells(),
            got: policy.actions.len(),
        });
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| run_episode(world, policy, exploration_rate, seed, i))
        .collect())
}

pub fn rollout(
    world: &Gridworld,
    policy: &TabularPolicy,
    exploration_rate: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    Ok(simulate(world, policy, exploration_rate, seed, count)?
        .into_iter()
        .map(|e| e.trajectory)
        .collect())
}

/// Fraction of greedy episodes that end on a goal cell.
pub fn success_rate(world: &Gridworld, policy: &TabularPolicy, episodes: usize, seed: u64) -> Result<f64> {
    success_rate_with_exploration(world, policy, 0.0, episodes, seed)
}

pub fn success_rate_with_exploration(
    world: &Gridworld,
    policy: &TabularPolicy,
    exploration_rate: f64,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be >= 1"));
    }
    let runs = simulate(world, policy, exploration_rate, seed, episodes)?;
    let hits = runs.iter().filter(|e| e.outcome == Outcome::Goal).count();
    Ok(hits as f64 / episodes as f64)
}
