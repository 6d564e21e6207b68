use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{simulate, success_rate, value_iteration, Gridworld, TabularPolicy, DEFAULT_TOLERANCE};
use crate::alignment::tac;
use crate::datalab::{corrupt_labels, label_pairs, NoiseSpec};
use crate::error::{Result, StageExt};
use crate::reward::{LinearRewardModel, PreferenceDataset, Trajectory};
use crate::trainer::{train, TrainConfig, TrainRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// One batch of expert rollouts per rate; higher rates give worse behaviour.
    pub exploration_rates: Vec<f64>,
    pub episodes_per_rate: usize,
    pub num_preferences: usize,
    /// Return gap below which expert labels, training metrics and reported TAC count a tie.
    pub tie_epsilon: f64,
    /// Uniform label-flip rate applied before training.
    pub noise_rate: f64,
    pub train: TrainConfig,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            exploration_rates: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
            episodes_per_rate: 12,
            num_preferences: 148,
            tie_epsilon: 0.0,
            noise_rate: 0.0,
            train: TrainConfig::default(),
            eval_episodes: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub num_trajectories: usize,
    pub num_preferences: usize,
    pub flipped_labels: usize,
    pub learned_weights: Vec<f64>,
    pub epochs_run: usize,
    /// TAC of the learned weights against the labels it was trained on.
    pub train_tac: Option<f64>,
    /// TAC of the learned weights against the uncorrupted expert labels.
    pub clean_tac: Option<f64>,
    pub learned_success_rate: f64,
    pub expert_success_rate: f64,
    /// Fraction of decision cells where both planners pick the same action.
    pub policy_agreement: f64,
    /// Start-state value of each policy, both measured with the expert reward.
    pub learned_policy_value: f64,
    pub expert_policy_value: f64,
}

/// Rollouts of `policy` at each exploration rate, with distinct ids.
pub fn graded_trajectories(
    world: &Gridworld,
    policy: &TabularPolicy,
    rates: &[f64],
    episodes_per_rate: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(rates.len() * episodes_per_rate);
    for (k, &rate) in rates.iter().enumerate() {
        let batch_seed = seed.wrapping_mul(1_000).wrapping_add(k as u64);
        for e in simulate(world, policy, rate, batch_seed, episodes_per_rate)? {
            out.push(e.trajectory);
        }
    }
    Ok(out)
}

fn start_value(world: &Gridworld, values: &[f64]) -> f64 {
    let starts = world.starts();
    starts.iter().map(|&s| values[s]).sum::<f64>() / starts.len() as f64
}

/// Expert rollouts, expert labels, training, planning with the learned reward
/// and a comparison against planning with the expert reward.
pub fn end_to_end(world: &Gridworld, expert_weights: &[f64], config: &PipelineConfig) -> Result<PipelineReport> {
    let expert = LinearRewardModel::new(expert_weights.to_vec(), world.gamma()).stage("config")?;
    let expert_policy = value_iteration(world, &expert, DEFAULT_TOLERANCE).stage("expert planning")?;

    let trajectories = graded_trajectories(
        world,
        &expert_policy,
        &config.exploration_rates,
        config.episodes_per_rate,
        config.seed,
    )
    .stage("rollout")?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1abe1);
    let records = label_pairs(&trajectories, &expert, config.num_preferences, config.tie_epsilon, &mut rng)
        .stage("labelling")?;
    let clean = PreferenceDataset::new(trajectories, records).stage("labelling")?;
    let (noisy, mask) = corrupt_labels(&clean, &NoiseSpec::uniform(config.noise_rate, config.seed ^ 0x0f11))
        .stage("label noise")?;

    let train_config = TrainConfig {
        gamma: world.gamma(),
        tie_epsilon: config.tie_epsilon,
        ..config.train.clone()
    };
    let run: TrainRun = train(&noisy, &train_config).stage("training")?;
    let learned = run.model().stage("training")?;
    let learned_policy = value_iteration(world, &learned, DEFAULT_TOLERANCE).stage("learned planning")?;

    let learned_success_rate =
        success_rate(world, &learned_policy, config.eval_episodes, config.seed).stage("evaluation")?;
    let expert_success_rate =
        success_rate(world, &expert_policy, config.eval_episodes, config.seed).stage("evaluation")?;
    let decision: Vec<usize> = (0..world.num_cells()).filter(|&c| world.is_decision_cell(c)).collect();
    let same = decision
        .iter()
        .filter(|&&c| learned_policy.action(c) == expert_policy.action(c))
        .count();
    let learned_values =
        super::evaluate_policy(world, &expert, &learned_policy, DEFAULT_TOLERANCE).stage("evaluation")?;

    Ok(PipelineReport {
        num_trajectories: noisy.num_trajectories(),
        num_preferences: noisy.len(),
        flipped_labels: mask.iter().filter(|&&m| m).count(),
        learned_weights: learned.weights().to_vec(),
        epochs_run: run.stopped_at_epoch,
        train_tac: tac(&noisy, &learned, config.tie_epsilon).ok().map(|r| r.tac),
        clean_tac: tac(&clean, &learned, config.tie_epsilon).ok().map(|r| r.tac),
        learned_success_rate,
        expert_success_rate,
        policy_agreement: same as f64 / decision.len() as f64,
        learned_policy_value: start_value(world, &learned_values),
        expert_policy_value: start_value(world, &expert_policy.values),
    })
}
