use std::collections::VecDeque;

use proptest::prelude::*;
use tac_core::envlab::{
    end_to_end, evaluate_policy, success_rate_with_exploration, value_iteration, Action, Cell, FeatureSet, Gridworld,
    PipelineConfig, TabularPolicy,
};
use tac_core::LinearRewardModel;

const MAZE: [&str; 5] = ["S..#....", ".#.#.##.", ".#...#..", ".####.#.", "......#G"];

fn model(weights: &[f64], world: &Gridworld) -> LinearRewardModel {
    LinearRewardModel::new(weights.to_vec(), world.gamma()).unwrap()
}

/// Step counts to the goal by breadth-first search over open cells.
fn bfs_distances(world: &Gridworld) -> Vec<Option<usize>> {
    let n = world.num_cells();
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if world.cell(i) == Cell::Goal {
            dist[i] = Some(0);
            queue.push_back(i);
        }
    }
    while let Some(c) = queue.pop_front() {
        for a in Action::ALL {
            // neighbours that can step into `c`
            for from in 0..n {
                if dist[from].is_none() && world.is_decision_cell(from) && world.step_target(from, a).0 == c {
                    dist[from] = Some(dist[c].unwrap() + 1);
                    queue.push_back(from);
                }
            }
        }
    }
    dist
}

#[test]
fn goal_only_values_follow_shortest_paths() {
    let world = Gridworld::new(&MAZE, 0.9, 0.0, FeatureSet::Standard, 60).unwrap();
    let policy = value_iteration(&world, &model(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &world), 1e-12).unwrap();
    let dist = bfs_distances(&world);
    for c in (0..world.num_cells()).filter(|&c| world.is_decision_cell(c)) {
        let d = dist[c].expect("maze is connected");
        assert!((policy.values[c] - 0.9f64.powi(d as i32 - 1)).abs() < 1e-9, "cell {c}");
        let next = world.step_target(c, policy.action(c).unwrap()).0;
        assert_eq!(dist[next], Some(d - 1), "cell {c} does not move closer");
    }
}

fn route_policy(world: &Gridworld, detour: bool) -> TabularPolicy {
    let mut policy = TabularPolicy::constant(world, Action::Right);
    for c in (0..world.num_cells()).filter(|&c| world.is_decision_cell(c)) {
        let (r, col) = world.position(c);
        let a = match (r, col) {
            (0, 4) | (1, 4) => Action::Down,
            (0, _) => Action::Right,
            (1, 0) if detour => Action::Up,
            (1, 0) => Action::Down,
            (2, 0) if detour => Action::Up,
            _ => Action::Right,
        };
        policy.actions[c] = Some(a);
    }
    policy
}

fn route_values(world: &Gridworld, weights: &[f64]) -> (f64, f64, TabularPolicy) {
    let m = model(weights, world);
    let start = world.starts()[0];
    let detour = evaluate_policy(world, &m, &route_policy(world, true), 1e-12).unwrap()[start];
    let corridor = evaluate_policy(world, &m, &route_policy(world, false), 1e-12).unwrap()[start];
    (detour, corridor, value_iteration(world, &m, 1e-12).unwrap())
}

#[test]
fn heavy_hazard_penalty_takes_the_detour() {
    let world = Gridworld::hazard_corridor();
    let (detour, corridor, planned) = route_values(&world, &[1.0, -10.0, -0.05, 0.0, 0.0, 0.0]);
    let start = world.starts()[0];
    assert!(detour > corridor, "{detour} vs {corridor}");
    assert_eq!(planned.action(start), Some(Action::Up));
    assert!(planned.values[start] >= detour - 1e-9);
}

#[test]
fn light_hazard_penalty_takes_the_corridor() {
    let world = Gridworld::hazard_corridor();
    let (detour, corridor, planned) = route_values(&world, &[1.0, -0.1, -0.05, 0.0, 0.0, 0.0]);
    let start = world.starts()[0];
    assert!(corridor > detour, "{detour} vs {corridor}");
    assert_eq!(planned.action(start), Some(Action::Right));
    assert!(planned.values[start] >= corridor - 1e-9);
}

/// Probability of reaching the goal within the step budget, by backward induction.
fn exact_success(world: &Gridworld, policy: &TabularPolicy, epsilon: f64) -> f64 {
    let n = world.num_cells();
    let mut p = vec![0.0; n];
    for c in 0..n {
        if world.cell(c) == Cell::Goal {
            p[c] = 1.0;
        }
    }
    for _ in 0..world.max_steps() {
        let next: Vec<f64> = (0..n)
            .map(|c| {
                if !world.is_decision_cell(c) {
                    return p[c];
                }
                let probs = policy.action_probabilities(c, epsilon);
                Action::ALL
                    .iter()
                    .map(|&a| {
                        probs[a.index()]
                            * world
                                .transitions(c, a)
                                .iter()
                                .map(|t| {
                                    let reached = if world.cell(t.next) == Cell::Goal { 1.0 } else { 0.0 };
                                    t.probability * if world.is_decision_cell(t.next) { p[t.next] } else { reached }
                                })
                                .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        p = next;
    }
    p[world.starts()[0]]
}

#[test]
fn monte_carlo_success_matches_exact_recursion() {
    let world = Gridworld::new(&["S.........G"], 0.9, 0.0, FeatureSet::Standard, 15).unwrap();
    let policy = TabularPolicy::constant(&world, Action::Right);
    for epsilon in [0.2, 0.6] {
        let exact = exact_success(&world, &policy, epsilon);
        let simulated = success_rate_with_exploration(&world, &policy, epsilon, 5000, 42).unwrap();
        assert!((exact - simulated).abs() < 0.03, "eps {epsilon}: {exact} vs {simulated}");
    }
    let slippery = Gridworld::hazard_corridor();
    let policy = route_policy(&slippery, false);
    let exact = exact_success(&slippery, &policy, 0.1);
    let simulated = success_rate_with_exploration(&slippery, &policy, 0.1, 5000, 7).unwrap();
    assert!((exact - simulated).abs() < 0.03, "{exact} vs {simulated}");
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn positive_reward_scaling_keeps_the_greedy_policy(
        weights in prop::collection::vec(-5.0..5.0f64, 6),
        scale in 0.01..100.0f64,
        corridor in any::<bool>(),
    ) {
        let world = if corridor { Gridworld::hazard_corridor() } else { Gridworld::open7() };
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let a = value_iteration(&world, &model(&weights, &world), 1e-10).unwrap();
        let b = value_iteration(&world, &model(&scaled, &world), 1e-10 * scale).unwrap();
        prop_assert_eq!(a.actions, b.actions);
    }
}

const EXPERT: [f64; 6] = [10.0, -10.0, -0.1, 0.5, -0.5, -1.0];

#[test]
fn soft_tac_holds_up_under_label_noise_in_the_pipeline() {
    let world = Gridworld::open7();
    let mut means = [0.0; 2];
    for seed in 0..20 {
        for (k, loss) in [tac_core::LossKind::SoftTac, tac_core::LossKind::CrossEntropy].into_iter().enumerate() {
            let config = PipelineConfig {
                noise_rate: 0.3,
                tie_epsilon: 0.5,
                seed,
                eval_episodes: 20,
                train: tac_core::TrainConfig { loss, seed, ..Default::default() },
                ..PipelineConfig::default()
            };
            let report = end_to_end(&world, &EXPERT, &config).unwrap();
            means[k] += report.clean_tac.expect("clean labels are not degenerate") / 20.0;
        }
    }
    assert!(means[0] >= means[1], "soft-tac {} vs cross-entropy {}", means[0], means[1]);
}
