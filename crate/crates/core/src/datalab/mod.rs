//! Synthetic preference data, label noise, the five-item toy fixture and
//! the robustness ablation harnesses.

mod ablation;
pub mod io;

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{Label, LinearRewardModel, PreferenceDataset, PreferenceRecord, Trajectory};

pub use ablation::{
    ablation_preference_count, ablation_segment_length, format_count_table, format_length_table,
    format_sig6, sample_models, CountAblationRow, LengthAblationRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureDistribution {
    StandardNormal,
    Uniform { lo: f64, hi: f64 },
}

impl FeatureDistribution {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            FeatureDistribution::StandardNormal => rng.sample(StandardNormal),
            FeatureDistribution::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub num_trajectories: usize,
    pub steps_range: (usize, usize),
    pub feature_distribution: FeatureDistribution,
    pub true_weights: Vec<f64>,
    pub gamma: f64,
    pub num_preferences: usize,
    pub tie_epsilon: f64,
    /// Pairs whose return difference under the true weights is smaller than
    /// this are skipped, along with exact ties.
    #[serde(default)]
    pub min_abs_delta: f64,
    pub seed: u64,
}

/// Smallest return difference kept by [`SyntheticSpec::realizable`]. At this
/// gap a pair's soft agreement at sharpness 1000 is within 1e-4 of one.
pub const DEFAULT_MIN_ABS_DELTA: f64 = 0.005;

impl SyntheticSpec {
    /// `num_preferences` labelled pairs over standard-normal features of dimension `dim`,
    /// with true weights drawn from the same seed.
    pub fn realizable(dim: usize, num_trajectories: usize, num_preferences: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let true_weights = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            dim,
            num_trajectories,
            steps_range: (1, 10),
            feature_distribution: FeatureDistribution::StandardNormal,
            true_weights,
            gamma: 1.0,
            num_preferences,
            tie_epsilon: 0.0,
            min_abs_delta: DEFAULT_MIN_ABS_DELTA,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if self.true_weights.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.true_weights.len(),
            });
        }
        let (lo, hi) = self.steps_range;
        if lo == 0 || lo > hi {
            return Err(Error::param("steps_range", format!("invalid range ({lo}, {hi})")));
        }
        if !(self.min_abs_delta >= 0.0) {
            return Err(Error::param("min_abs_delta", "must be >= 0"));
        }
        if let FeatureDistribution::Uniform { lo, hi } = self.feature_distribution {
            if !(lo < hi) {
                return Err(Error::param("feature_distribution", "uniform needs lo < hi"));
            }
        }
        let max_pairs = self.num_trajectories * self.num_trajectories.saturating_sub(1) / 2;
        if self.num_preferences > max_pairs {
            return Err(Error::param(
                "num_preferences",
                format!("{} requested but only {max_pairs} distinct pairs exist", self.num_preferences),
            ));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PreferenceDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.steps_range;
    let trajectories: Vec<Trajectory> = (0..spec.num_trajectories)
        .map(|i| {
            let len = rng.random_range(lo..=hi);
            let steps = (0..len)
                .map(|_| {
                    (0..spec.dim)
                        .map(|_| spec.feature_distribution.sample(&mut rng))
                        .collect()
                })
                .collect();
            Trajectory::new(format!("traj{i:04}"), steps)
        })
        .collect::<Result<_>>()?;
    let model = LinearRewardModel::new(spec.true_weights.clone(), spec.gamma)?;
    let records = label_pairs_with_gap(
        &trajectories,
        &model,
        spec.num_preferences,
        spec.tie_epsilon,
        spec.min_abs_delta,
        &mut rng,
    )?;
    PreferenceDataset::new(trajectories, records)
}

/// Samples distinct unordered pairs, orients each at random and labels it by
/// the sign of the return difference under `model`.
///
/// With a zero tie band and non-zero weights, pairs whose returns are exactly
/// equal are skipped so the labelling model satisfies every record strictly.
pub fn label_pairs<R: Rng>(
    trajectories: &[Trajectory],
    model: &LinearRewardModel,
    num_preferences: usize,
    tie_epsilon: f64,
    rng: &mut R,
) -> Result<Vec<PreferenceRecord>> {
    label_pairs_with_gap(trajectories, model, num_preferences, tie_epsilon, 0.0, rng)
}

/// [`label_pairs`], also skipping pairs whose return difference is below `min_abs_delta`.
pub fn label_pairs_with_gap<R: Rng>(
    trajectories: &[Trajectory],
    model: &LinearRewardModel,
    num_preferences: usize,
    tie_epsilon: f64,
    min_abs_delta: f64,
    rng: &mut R,
) -> Result<Vec<PreferenceRecord>> {
    let n = trajectories.len();
    let returns: Vec<f64> = trajectories
        .iter()
        .map(|t| model.discounted_return(t))
        .collect::<Result<_>>()?;
    let skip_exact = tie_epsilon == 0.0 && model.weights().iter().any(|&w| w != 0.0);

    let mut candidates: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    candidates.shuffle(rng);

    let mut records = Vec::with_capacity(num_preferences);
    for (i, j) in candidates {
        if records.len() == num_preferences {
            break;
        }
        let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
        let delta = returns[a] - returns[b];
        if (skip_exact && delta == 0.0) || (delta != 0.0 && delta.abs() < min_abs_delta) {
            continue;
        }
        records.push(PreferenceRecord::new(
            trajectories[a].id(),
            trajectories[b].id(),
            Label::from_delta(delta, tie_epsilon),
        ));
    }
    if records.len() < num_preferences {
        return Err(Error::param(
            "num_preferences",
            format!(
                "only {} pairs with separated returns available, {num_preferences} requested",
                records.len()
            ),
        ));
    }
    Ok(records)
}

/// Upper bound (exclusive) on label-noise rates for three label classes: (n − 1) / n.
pub const MAX_NOISE_RATE: f64 = 2.0 / 3.0;

pub type RateFn = Arc<dyn Fn(&Trajectory, &Trajectory) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NoiseMode {
    Uniform(f64),
    /// Flip probability as a function of the compared trajectories.
    InputDependent(RateFn),
}

impl std::fmt::Debug for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseMode::Uniform(r) => write!(f, "Uniform({r})"),
            NoiseMode::InputDependent(_) => write!(f, "InputDependent(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(rate: f64, seed: u64) -> Self {
        Self {
            mode: NoiseMode::Uniform(rate),
            seed,
        }
    }
}

fn check_rate(rate: f64) -> Result<f64> {
    if !(0.0..MAX_NOISE_RATE).contains(&rate) {
        return Err(Error::param(
            "noise_rate",
            format!("{rate} outside [0, 2/3)"),
        ));
    }
    Ok(rate)
}

/// A label different from `label`, uniformly among the other two classes.
pub fn other_label<R: Rng>(label: Label, rng: &mut R) -> Label {
    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != label).collect();
    others[rng.random_range(0..2)]
}

/// Flips each label with its noise rate to one of the other two classes.
/// Returns the corrupted dataset and a mask of the records that changed.
pub fn corrupt_labels(data: &PreferenceDataset, noise: &NoiseSpec) -> Result<(PreferenceDataset, Vec<bool>)> {
    if let NoiseMode::Uniform(rate) = noise.mode {
        check_rate(rate)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut mask = Vec::with_capacity(data.len());
    let mut records = Vec::with_capacity(data.len());
    for rec in data.records() {
        let rate = match &noise.mode {
            NoiseMode::Uniform(r) => *r,
            NoiseMode::InputDependent(f) => {
                let left = data.trajectory(&rec.left).expect("validated dataset");
                let right = data.trajectory(&rec.right).expect("validated dataset");
                check_rate(f(left, right))?
            }
        };
        let flip = rng.random_bool(rate);
        let label = if flip { other_label(rec.label, &mut rng) } else { rec.label };
        mask.push(flip);
        records.push(PreferenceRecord { label, ..rec.clone() });
    }
    let corrupted = data.with_records(records)?;
    Ok((corrupted, mask))
}

/// Five single-step items with scalar features 0..=4.
///
/// Each adjacent pair prefers the higher-feature item. The noisy variant adds
/// (item2, item4) labelled as preferring item2, which contradicts the rest.
pub fn toy_fixture(noisy: bool) -> PreferenceDataset {
    let items: Vec<Trajectory> = (0..5)
        .map(|i| Trajectory::new(format!("item{i}"), vec![vec![f64::from(i)]]).expect("valid item"))
        .collect();
    let mut records: Vec<PreferenceRecord> = (0..4)
        .map(|i| PreferenceRecord::new(format!("item{i}"), format!("item{}", i + 1), Label::RightPreferred))
        .collect();
    if noisy {
        records.push(PreferenceRecord::new("item2", "item4", Label::LeftPreferred));
    }
    PreferenceDataset::new(items, records).expect("toy fixture is valid")
}

/// Index of the mislabeled record in the noisy toy fixture.
pub const TOY_MISLABELED_INDEX: usize = 4;

/// The record pairs with orientation removed.
pub fn unordered_pairs(data: &PreferenceDataset) -> HashSet<(String, String)> {
    data.records()
        .iter()
        .map(|r| {
            if r.left <= r.right {
                (r.left.clone(), r.right.clone())
            } else {
                (r.right.clone(), r.left.clone())
            }
        })
        .collect()
}
