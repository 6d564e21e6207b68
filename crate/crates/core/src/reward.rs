//! Trajectories, preference records and linear reward models.
//!
//! A trajectory is stored only through its per-step feature image
//! `φ(s_t, a_t, s_{t+1})`; a linear reward scores a step as `θ · φ` and the
//! return of a trajectory is the discounted sum of those scores, discounting
//! from the first transition with exponent zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexMap;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type FeatureVector = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRepr")]
pub struct Trajectory {
    id: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    steps: Vec<FeatureVector>,
}

#[derive(Deserialize)]
struct TrajectoryRepr {
    id: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    steps: Vec<FeatureVector>,
}

impl TryFrom<TrajectoryRepr> for Trajectory {
    type Error = Error;

    fn try_from(raw: TrajectoryRepr) -> Result<Self> {
        Trajectory::with_metadata(raw.id, raw.steps, raw.metadata)
    }
}

impl Trajectory {
    pub fn new(id: impl Into<String>, steps: Vec<FeatureVector>) -> Result<Self> {
        Self::with_metadata(id, steps, BTreeMap::new())
    }

    pub fn with_metadata(
        id: impl Into<String>,
        steps: Vec<FeatureVector>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let traj = Self {
            id: id.into(),
            metadata,
            steps,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidTrajectory {
            id: self.id.clone(),
            reason,
        };
        let first = self
            .steps
            .first()
            .ok_or_else(|| fail("no steps".to_string()))?;
        if first.is_empty() {
            return Err(fail("zero-dimensional features".to_string()));
        }
        for (t, step) in self.steps.iter().enumerate() {
            if step.len() != first.len() {
                return Err(fail(format!(
                    "step {t} has dimension {}, expected {}",
                    step.len(),
                    first.len()
                )));
            }
            if let Some(v) = step.iter().find(|v| !v.is_finite()) {
                return Err(fail(format!("step {t} has non-finite feature {v}")));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn steps(&self) -> &[FeatureVector] {
        &self.steps
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.steps[0].len()
    }

    /// Discounted feature sum `Σ_t γ^t φ_t`.
    pub fn discounted_features(&self, gamma: f64) -> FeatureVector {
        let mut acc = vec![0.0; self.dim()];
        let mut discount = 1.0;
        for step in &self.steps {
            for (a, f) in acc.iter_mut().zip(step) {
                *a += discount * f;
            }
            discount *= gamma;
        }
        acc
    }

    /// The first `len` steps; shorter trajectories are returned whole.
    pub fn truncated(&self, len: usize) -> Trajectory {
        let keep = len.max(1).min(self.steps.len());
        Trajectory {
            id: self.id.clone(),
            metadata: self.metadata.clone(),
            steps: self.steps[..keep].to_vec(),
        }
    }
}

/// Which side of a pair is preferred. Encoded as `+1` (left), `-1` (right), `0` (tie).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    LeftPreferred,
    RightPreferred,
    Tie,
}

impl Label {
    pub fn value(self) -> i8 {
        match self {
            Label::LeftPreferred => 1,
            Label::RightPreferred => -1,
            Label::Tie => 0,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::LeftPreferred),
            -1 => Some(Label::RightPreferred),
            0 => Some(Label::Tie),
            _ => None,
        }
    }

    /// Label from the sign of a return difference with a symmetric tie band.
    pub fn from_delta(delta: f64, tie_epsilon: f64) -> Self {
        if delta > tie_epsilon {
            Label::LeftPreferred
        } else if delta < -tie_epsilon {
            Label::RightPreferred
        } else {
            Label::Tie
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::LeftPreferred => Label::RightPreferred,
            Label::RightPreferred => Label::LeftPreferred,
            Label::Tie => Label::Tie,
        }
    }

    pub fn is_strict(self) -> bool {
        self != Label::Tie
    }

    pub const ALL: [Label; 3] = [Label::LeftPreferred, Label::RightPreferred, Label::Tie];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_value(v)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be -1, 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub left: String,
    pub right: String,
    pub label: Label,
}

impl PreferenceRecord {
    pub fn new(left: impl Into<String>, right: impl Into<String>, label: Label) -> Self {
        Self {
            left: left.into(),
            right: right.into(),
            label,
        }
    }

    /// Same comparison with sides swapped and the label negated.
    pub fn reversed(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            label: self.label.flipped(),
        }
    }
}

/// A cycle among strict preferences (winner → loser edges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitivityWarning {
    pub trajectories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    trajectories: IndexMap<String, Trajectory>,
    records: Vec<PreferenceRecord>,
    dim: usize,
}

impl PreferenceDataset {
    pub fn new(trajectories: Vec<Trajectory>, records: Vec<PreferenceRecord>) -> Result<Self> {
        let mut map = IndexMap::with_capacity(trajectories.len());
        for traj in trajectories {
            traj.validate()?;
            if map.contains_key(traj.id()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate trajectory id `{}`",
                    traj.id()
                )));
            }
            map.insert(traj.id().to_string(), traj);
        }
        Self::from_parts(map, records)
    }

    fn from_parts(
        trajectories: IndexMap<String, Trajectory>,
        records: Vec<PreferenceRecord>,
    ) -> Result<Self> {
        let dim = match trajectories.values().next() {
            Some(t) => t.dim(),
            None => return Err(Error::InvalidDataset("no trajectories".to_string())),
        };
        for traj in trajectories.values() {
            if traj.dim() != dim {
                return Err(Error::InvalidDataset(format!(
                    "trajectory `{}` has dimension {}, expected {dim}",
                    traj.id(),
                    traj.dim()
                )));
            }
        }
        let mut seen: HashMap<(&str, &str), Label> = HashMap::new();
        for (n, rec) in records.iter().enumerate() {
            for id in [&rec.left, &rec.right] {
                if !trajectories.contains_key(id.as_str()) {
                    return Err(Error::InvalidDataset(format!(
                        "record {n} references missing trajectory `{id}`"
                    )));
                }
            }
            if rec.left == rec.right {
                return Err(Error::InvalidDataset(format!(
                    "record {n} compares `{}` with itself",
                    rec.left
                )));
            }
            let (key, label) = if rec.left <= rec.right {
                ((rec.left.as_str(), rec.right.as_str()), rec.label)
            } else {
                ((rec.right.as_str(), rec.left.as_str()), rec.label.flipped())
            };
            if let Some(prev) = seen.insert(key, label) {
                if prev != label {
                    return Err(Error::InvalidDataset(format!(
                        "record {n} contradicts an earlier label for pair (`{}`, `{}`)",
                        rec.left, rec.right
                    )));
                }
            }
        }
        Ok(Self {
            trajectories,
            records,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[PreferenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn trajectory(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.get(id)
    }

    /// Trajectories in insertion order.
    pub fn trajectories(&self) -> impl ExactSizeIterator<Item = &Trajectory> {
        self.trajectories.values()
    }

    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    /// Same trajectories, different records.
    pub fn with_records(&self, records: Vec<PreferenceRecord>) -> Result<Self> {
        Self::from_parts(self.trajectories.clone(), records)
    }

    /// Records selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records.get(i).cloned().ok_or_else(|| {
                    Error::InvalidDataset(format!("record index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_records(records)
    }

    /// Same records, every trajectory replaced by `f(trajectory)`.
    pub fn map_trajectories(&self, f: impl Fn(&Trajectory) -> Trajectory) -> Result<Self> {
        let trajectories = self
            .trajectories
            .values()
            .map(|t| (t.id().to_string(), f(t)))
            .collect();
        Self::from_parts(trajectories, self.records.clone())
    }

    pub fn max_trajectory_len(&self) -> usize {
        self.trajectories.values().map(Trajectory::len).max().unwrap_or(0)
    }

    /// Cycles among strict preferences. Transitivity is not enforced at load.
    pub fn transitivity_warnings(&self) -> Vec<TransitivityWarning> {
        let mut graph = DiGraph::<&str, ()>::new();
        let nodes: HashMap<&str, _> = self
            .trajectories
            .keys()
            .map(|id| (id.as_str(), graph.add_node(id.as_str())))
            .collect();
        for rec in &self.records {
            let (winner, loser) = match rec.label {
                Label::LeftPreferred => (&rec.left, &rec.right),
                Label::RightPreferred => (&rec.right, &rec.left),
                Label::Tie => continue,
            };
            graph.add_edge(nodes[winner.as_str()], nodes[loser.as_str()], ());
        }
        tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .map(|scc| {
                let mut ids: Vec<String> = scc.iter().map(|&n| graph[n].to_string()).collect();
                ids.sort();
                TransitivityWarning { trajectories: ids }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr")]
pub struct LinearRewardModel {
    weights: Vec<f64>,
    gamma: f64,
}

#[derive(Deserialize)]
struct ModelRepr {
    weights: Vec<f64>,
    gamma: f64,
}

impl TryFrom<ModelRepr> for LinearRewardModel {
    type Error = Error;

    fn try_from(raw: ModelRepr) -> Result<Self> {
        LinearRewardModel::new(raw.weights, raw.gamma)
    }
}

impl LinearRewardModel {
    pub fn new(weights: Vec<f64>, gamma: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weights", "must be non-empty"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::param("weights", format!("non-finite weight {w}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} outside [0, 1]")));
        }
        Ok(Self { weights, gamma })
    }

    /// Undiscounted model (γ = 1), the convention inside the losses.
    pub fn undiscounted(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, 1.0)
    }

    pub fn zeros(dim: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], gamma)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, self.gamma)
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got,
            });
        }
        Ok(())
    }

    pub fn step_reward(&self, features: &[f64]) -> Result<f64> {
        self.check_dim(features.len())?;
        Ok(dot(&self.weights, features))
    }

    /// `G(τ) = Σ_t γ^t θ·φ_t`.
    pub fn discounted_return(&self, traj: &Trajectory) -> Result<f64> {
        self.check_dim(traj.dim())?;
        let mut total = 0.0;
        let mut discount = 1.0;
        for step in traj.steps() {
            total += discount * dot(&self.weights, step);
            discount *= self.gamma;
        }
        Ok(total)
    }

    /// `∂G/∂θ`, which for a linear model is the discounted feature sum.
    pub fn return_gradient(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check_dim(traj.dim())?;
        Ok(traj.discounted_features(self.gamma))
    }
}

/// Per-record labels and discounted feature differences `Φ(τ^i) − Φ(τ^j)`.
///
/// For a linear model `ΔG = θ · (Φ(τ^i) − Φ(τ^j))`, so every return
/// difference, loss and gradient can be computed from this table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSet {
    labels: Vec<Label>,
    diffs: Vec<Vec<f64>>,
    dim: usize,
}

impl ComparisonSet {
    pub fn from_dataset(data: &PreferenceDataset, gamma: f64) -> Self {
        let features: HashMap<&str, Vec<f64>> = data
            .trajectories()
            .map(|t| (t.id(), t.discounted_features(gamma)))
            .collect();
        let (labels, diffs) = data
            .records()
            .iter()
            .map(|rec| {
                let diff = features[rec.left.as_str()]
                    .iter()
                    .zip(&features[rec.right.as_str()])
                    .map(|(a, b)| a - b)
                    .collect();
                (rec.label, diff)
            })
            .unzip();
        Self {
            labels,
            diffs,
            dim: data.dim(),
        }
    }

    pub fn from_parts(labels: Vec<Label>, diffs: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != diffs.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: diffs.len(),
            });
        }
        let dim = diffs.first().map_or(0, Vec::len);
        if let Some(d) = diffs.iter().find(|d| d.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
        Ok(Self { labels, diffs, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn diff(&self, i: usize) -> &[f64] {
        &self.diffs[i]
    }

    pub fn delta(&self, weights: &[f64], i: usize) -> f64 {
        dot(weights, &self.diffs[i])
    }

    pub fn deltas(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: weights.len(),
            });
        }
        Ok(self.diffs.iter().map(|d| dot(weights, d)).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            diffs: indices.iter().map(|&i| self.diffs[i].clone()).collect(),
            dim: self.dim,
        }
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        Self::from_parts(labels, self.diffs.clone())
    }
}
