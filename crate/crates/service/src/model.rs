//! Request and response bodies, plus the pure scoring used by evaluate.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tac_core::alignment::PairCounts;
use tac_core::datalab::io::DatasetPayload;
use tac_core::trainer::{StopReason, TrainConfig};
use tac_core::{Error, Label, LinearRewardModel, LossKind, PreferenceDataset, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Returns and agreement only.
    Control,
    /// Control feedback plus the TAC score.
    Alignment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub condition: Condition,
    /// Inline dataset; exactly one of `dataset` and `dataset_path` is required.
    #[serde(default)]
    pub dataset: Option<DatasetPayload>,
    /// Preference file on the server; its header names the trajectory file.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    /// Discount for returns; defaults to the dataset's `gamma_default`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub tie_epsilon: f64,
    /// Explicit record indices to display.
    #[serde(default)]
    pub display_pairs: Option<Vec<usize>>,
    /// Number of records to display, drawn at random with `display_seed`.
    #[serde(default)]
    pub display_count: Option<usize>,
    #[serde(default)]
    pub display_seed: u64,
    /// Records that TAC and accuracy are computed on; all of them by default.
    #[serde(default)]
    pub scoring_pairs: Option<Vec<usize>>,
    /// Score on the display subset instead of `scoring_pairs`.
    #[serde(default)]
    pub score_display_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub condition: Condition,
    pub gamma: f64,
    pub tie_epsilon: f64,
    pub created_at: String,
    pub dim: usize,
    pub num_pairs: usize,
    pub num_trajectories: usize,
    pub display_pairs: Vec<usize>,
    pub scoring_pairs: Vec<usize>,
    /// Trajectory ids on each cycle of strict preferences.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preference_cycles: Vec<Vec<String>>,
    pub iteration_count: usize,
    pub training_runs: Vec<TrainingRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeedback {
    pub index: usize,
    pub left: String,
    pub right: String,
    pub label: Label,
    pub left_return: f64,
    pub right_return: f64,
    pub induced: Label,
    pub agrees: bool,
}

/// Metrics shared by user iterations and training results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub per_pair: Vec<PairFeedback>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tac: Option<f64>,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub weights: Vec<f64>,
    pub per_pair: Vec<PairFeedback>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tac: Option<f64>,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Warning>,
    pub submitted_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tac: Option<f64>,
    pub accuracy: f64,
    pub submitted_at: String,
}

impl From<&Iteration> for IterationSummary {
    fn from(it: &Iteration) -> Self {
        Self {
            index: it.index,
            tac: it.tac,
            accuracy: it.accuracy,
            submitted_at: it.submitted_at.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRequest {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    /// `gamma` and `tie_epsilon` are taken from the session.
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default)]
    pub grid: Option<GridRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCellSummary {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Result of one automated training request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub index: usize,
    pub machine_generated: bool,
    pub loss: LossKind,
    pub config: TrainConfig,
    pub learned_weights: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_at_epoch: usize,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tac: Option<f64>,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<Warning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<GridCellSummary>>,
    pub completed_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub id: String,
    pub length: usize,
    /// Discounted feature sums; the return is their dot product with the weights.
    pub feature_totals: Vec<f64>,
    pub feature_means: Vec<f64>,
    /// Running discounted feature sums after each step, for sparklines.
    pub cumulative: Vec<Vec<f64>>,
}

impl TrajectorySummary {
    pub fn of(traj: &Trajectory, gamma: f64) -> Self {
        let dim = traj.dim();
        let mut acc = vec![0.0; dim];
        let mut means = vec![0.0; dim];
        let mut discount = 1.0;
        let mut cumulative = Vec::with_capacity(traj.len());
        for step in traj.steps() {
            for k in 0..dim {
                acc[k] += discount * step[k];
                means[k] += step[k] / traj.len() as f64;
            }
            discount *= gamma;
            cumulative.push(acc.clone());
        }
        Self {
            id: traj.id().to_string(),
            length: traj.len(),
            feature_totals: acc,
            feature_means: means,
            cumulative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub index: usize,
    pub left: TrajectorySummary,
    pub right: TrajectorySummary,
    pub label: Label,
    pub displayed: bool,
    pub scored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsResponse {
    pub display_pairs: Vec<usize>,
    pub scoring_pairs: Vec<usize>,
    pub pairs: Vec<PairView>,
}

/// Per-pair returns and verdicts for every record, with TAC and accuracy on `scoring`.
/// TAC is left out entirely unless `with_tac`.
pub fn score(
    data: &PreferenceDataset,
    weights: &[f64],
    gamma: f64,
    tie_epsilon: f64,
    scoring: &[usize],
    with_tac: bool,
) -> Result<Scores, Error> {
    let model = LinearRewardModel::new(weights.to_vec(), gamma)?;
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: model.dim(),
        });
    }
    let mut per_pair = Vec::with_capacity(data.len());
    for (index, rec) in data.records().iter().enumerate() {
        let ret = |id: &str| model.discounted_return(data.trajectory(id).expect("validated dataset"));
        let (left_return, right_return) = (ret(&rec.left)?, ret(&rec.right)?);
        let induced = Label::from_delta(left_return - right_return, tie_epsilon);
        per_pair.push(PairFeedback {
            index,
            left: rec.left.clone(),
            right: rec.right.clone(),
            label: rec.label,
            left_return,
            right_return,
            induced,
            agrees: induced == rec.label,
        });
    }
    let labels: Vec<Label> = scoring.iter().map(|&i| per_pair[i].label).collect();
    let deltas: Vec<f64> = scoring
        .iter()
        .map(|&i| per_pair[i].left_return - per_pair[i].right_return)
        .collect();
    let counts = PairCounts::from_deltas(&labels, &deltas, tie_epsilon);
    let accuracy = counts.accuracy()?;
    let (tac, warning) = if !with_tac {
        (None, None)
    } else {
        match counts.tac() {
            Ok(t) => (Some(t), None),
            Err(e @ Error::DegenerateDataset { .. }) => (
                None,
                Some(Warning {
                    code: "degenerate_tac".into(),
                    message: e.to_string(),
                }),
            ),
            Err(e) => return Err(e),
        }
    };
    Ok(Scores {
        per_pair,
        tac,
        accuracy,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tac_core::datalab::toy_fixture;

    #[test]
    fn toy_scores() {
        let data = toy_fixture(true);
        let all: Vec<usize> = (0..data.len()).collect();
        let s = score(&data, &[1.0], 1.0, 0.0, &all, true).unwrap();
        assert!((s.tac.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(s.accuracy, 0.8);
        assert!(!s.per_pair[4].agrees);
        let hidden = score(&data, &[1.0], 1.0, 0.0, &all, false).unwrap();
        assert_eq!(hidden.tac, None);
        assert_eq!(hidden.per_pair, s.per_pair);
    }

    #[test]
    fn zero_weights_warn() {
        let data = toy_fixture(false);
        let s = score(&data, &[0.0], 1.0, 0.0, &[0, 1, 2, 3], true).unwrap();
        assert_eq!(s.tac, None);
        assert_eq!(s.warning.unwrap().code, "degenerate_tac");
        assert!(s.per_pair.iter().all(|p| p.induced == Label::Tie));
    }

    #[test]
    fn summary_accumulates_with_discount() {
        let t = Trajectory::new("t", vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s = TrajectorySummary::of(&t, 0.5);
        assert_eq!(s.cumulative, vec![vec![1.0, 2.0], vec![2.5, 4.0]]);
        assert_eq!(s.feature_totals, vec![2.5, 4.0]);
        assert_eq!(s.feature_means, vec![2.0, 3.0]);
    }

    #[test]
    fn absent_tac_is_not_serialized() {
        let it = IterationSummary {
            index: 0,
            tac: None,
            accuracy: 1.0,
            submitted_at: "t".into(),
        };
        let v = serde_json::to_value(&it).unwrap();
        assert!(v.get("tac").is_none());
    }
}
