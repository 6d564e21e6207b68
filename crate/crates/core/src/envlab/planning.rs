use serde::{Deserialize, Serialize};

use super::{Action, Gridworld};
use crate::error::{Error, Result};
use crate::reward::LinearRewardModel;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Relative gap under which two action values count as equal.
const TIE_TOLERANCE: f64 = 1e-9;

/// A deterministic action per decision cell plus the value table it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub actions: Vec<Option<Action>>,
    pub values: Vec<f64>,
    /// Sup-norm change of the value table after each sweep.
    pub residuals: Vec<f64>,
}

impl TabularPolicy {
    /// The same action in every decision cell; values are left at zero.
    pub fn constant(world: &Gridworld, action: Action) -> Self {
        Self {
            actions: (0..world.num_cells())
                .map(|i| world.is_decision_cell(i).then_some(action))
                .collect(),
            values: vec![0.0; world.num_cells()],
            residuals: Vec::new(),
        }
    }

    pub fn action(&self, cell: usize) -> Option<Action> {
        self.actions[cell]
    }

    /// Action distribution in `cell` when exploring uniformly at rate `epsilon`.
    pub fn action_probabilities(&self, cell: usize, epsilon: f64) -> [f64; 4] {
        let mut p = [epsilon / 4.0; 4];
        if let Some(a) = self.actions[cell] {
            p[a.index()] += 1.0 - epsilon;
        }
        p
    }

    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }
}

struct Model {
    /// Per decision cell and action: (probability, next cell, reward, next is terminal).
    outcomes: Vec<[Vec<(f64, usize, f64, bool)>; 4]>,
}

fn build(world: &Gridworld, weights: &[f64]) -> Model {
    let outcomes = (0..world.num_cells())
        .map(|s| {
            Action::ALL.map(|a| {
                if !world.is_decision_cell(s) {
                    return Vec::new();
                }
                world
                    .transitions(s, a)
                    .into_iter()
                    .map(|t| {
                        let phi = world.features(s, t.next, t.bumped);
                        let r: f64 = phi.iter().zip(weights).map(|(f, w)| f * w).sum();
                        (t.probability, t.next, r, world.cell(t.next).is_terminal())
                    })
                    .collect()
            })
        })
        .collect();
    Model { outcomes }
}

fn q_value(outcomes: &[(f64, usize, f64, bool)], values: &[f64], gamma: f64) -> f64 {
    outcomes
        .iter()
        .map(|&(p, next, r, terminal)| p * (r + if terminal { 0.0 } else { gamma * values[next] }))
        .sum()
}

fn greedy(q: &[f64; 4]) -> Action {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let slack = TIE_TOLERANCE * scale;
    Action::ALL
        .into_iter()
        .find(|a| q[a.index()] >= best - slack)
        .expect("some action attains the maximum")
}

/// Synchronous value iteration on `world` with reward `model.weights · φ`,
/// discounting by the world's gamma. Stops once a sweep changes no value by
/// `tol` or more, then acts greedily with ties going to the earliest action.
pub fn value_iteration(world: &Gridworld, model: &LinearRewardModel, tol: f64) -> Result<TabularPolicy> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let gamma = world.gamma();
    if gamma >= 1.0 {
        return Err(Error::NonTerminating(format!(
            "gamma {gamma} gives no contraction; use gamma < 1"
        )));
    }
    model.check_dim(world.feature_dim())?;
    let m = build(world, model.weights());
    let n = world.num_cells();
    let mut values = vec![0.0; n];
    let mut residuals = Vec::new();
    let max_sweeps = 100_000;
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if !world.is_decision_cell(s) {
                    return 0.0;
                }
                m.outcomes[s]
                    .iter()
                    .map(|o| q_value(o, &values, gamma))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        residuals.push(residual);
        if residual < tol {
            break;
        }
        if residuals.len() >= max_sweeps {
            return Err(Error::NonTerminating(format!(
                "residual {residual} after {max_sweeps} sweeps"
            )));
        }
    }
    let actions = (0..n)
        .map(|s| {
            world.is_decision_cell(s).then(|| {
                let q = [0, 1, 2, 3].map(|a| q_value(&m.outcomes[s][a], &values, gamma));
                greedy(&q)
            })
        })
        .collect();
    Ok(TabularPolicy {
        actions,
        values,
        residuals,
    })
}

/// Expected discounted return of `policy` from every cell, by iterating its
/// Bellman operator until the change drops below `tol`.
pub fn evaluate_policy(
    world: &Gridworld,
    model: &LinearRewardModel,
    policy: &TabularPolicy,
    tol: f64,
) -> Result<Vec<f64>> {
    let gamma = world.gamma();
    if gamma >= 1.0 {
        return Err(Error::NonTerminating(format!("gamma {gamma} gives no contraction")));
    }
    model.check_dim(world.feature_dim())?;
    let m = build(world, model.weights());
    let mut values = vec![0.0; world.num_cells()];
    loop {
        let next: Vec<f64> = (0..world.num_cells())
            .map(|s| match policy.actions[s] {
                Some(a) if world.is_decision_cell(s) => q_value(&m.outcomes[s][a.index()], &values, gamma),
                _ => 0.0,
            })
            .collect();
        let residual = next.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        values = next;
        if residual < tol {
            return Ok(values);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envlab::FeatureSet;

    fn goal_only(world: &Gridworld) -> LinearRewardModel {
        let mut w = vec![0.0; world.feature_dim()];
        w[0] = 1.0;
        LinearRewardModel::new(w, world.gamma()).unwrap()
    }

    #[test]
    fn zero_reward_gives_zero_values_and_first_action() {
        let world = Gridworld::open7();
        let model = LinearRewardModel::zeros(6, 0.95).unwrap();
        let policy = value_iteration(&world, &model, 1e-9).unwrap();
        assert!(policy.values.iter().all(|&v| v == 0.0));
        assert_eq!(policy.action(0), Some(Action::Up));
    }

    #[test]
    fn gamma_one_is_rejected() {
        let world = Gridworld::open7().with_gamma(1.0).unwrap();
        let model = goal_only(&world);
        assert!(matches!(value_iteration(&world, &model, 1e-6), Err(Error::NonTerminating(_))));
        let world = Gridworld::open7();
        assert!(value_iteration(&world, &goal_only(&world), 0.0).is_err());
        let short = LinearRewardModel::undiscounted(vec![1.0]).unwrap();
        assert!(value_iteration(&world, &short, 1e-6).is_err());
    }

    #[test]
    fn residuals_contract_by_gamma() {
        let world = Gridworld::hazard_corridor();
        let model = LinearRewardModel::new(vec![1.0, -10.0, -0.1, 0.2, -0.2, -0.5], 0.9).unwrap();
        let policy = value_iteration(&world, &model, 1e-10).unwrap();
        assert!(policy.residuals.last().unwrap() < &1e-10);
        for pair in policy.residuals.windows(2) {
            assert!(pair[1] <= world.gamma() * pair[0] + 1e-12, "{pair:?}");
        }
    }

    #[test]
    fn planned_values_match_policy_evaluation() {
        let world = Gridworld::hazard_corridor();
        let model = LinearRewardModel::new(vec![1.0, -10.0, 0.0, 0.0, 0.0, 0.0], 0.9).unwrap();
        let policy = value_iteration(&world, &model, 1e-12).unwrap();
        let values = evaluate_policy(&world, &model, &policy, 1e-12).unwrap();
        for (a, b) in values.iter().zip(&policy.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_policy_covers_decision_cells_only() {
        let world = Gridworld::new(&["S#G"], 0.9, 0.0, FeatureSet::Minimal, 5).unwrap();
        let p = TabularPolicy::constant(&world, Action::Left);
        assert_eq!(p.actions, vec![Some(Action::Left), None, None]);
        let probs = p.action_probabilities(0, 0.2);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((probs[Action::Left.index()] - 0.85).abs() < 1e-15);
    }
}
