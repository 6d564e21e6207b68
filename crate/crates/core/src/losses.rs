//! Soft-TAC and Cross-Entropy (Bradley-Terry) losses with analytic gradients.
//!
//! Both losses see a record only through `z = α ΔG` and its feature
//! difference `D = Φ(τ^i) − Φ(τ^j)`, so `∂z/∂θ = α D`.
//!
//! Labels are stored as `y ∈ {+1, −1, 0}`; Cross-Entropy remaps them to
//! `y_ce = (y + 1) / 2 ∈ {1, 0, 0.5}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{ComparisonSet, Label, LinearRewardModel, PreferenceDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SoftTac,
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SoftTac => "soft-tac",
            LossKind::CrossEntropy => "cross-entropy",
        }
    }

    pub fn sample_loss(self, z: f64, label: Label) -> f64 {
        match self {
            LossKind::SoftTac => soft_tac_sample_loss(z, label),
            LossKind::CrossEntropy => cross_entropy_sample_loss(z, label),
        }
    }

    /// `∂ℓ/∂z` for one record.
    pub fn sample_slope(self, z: f64, label: Label) -> f64 {
        match self {
            LossKind::SoftTac => -label.as_f64() * sech2(z),
            LossKind::CrossEntropy => logistic(z) - ce_target(label),
        }
    }

    pub fn evaluate(
        self,
        weights: &[f64],
        pairs: &ComparisonSet,
        batch: &[usize],
        alpha: f64,
    ) -> Result<LossBatch> {
        match self {
            LossKind::SoftTac => soft_tac_loss(weights, pairs, batch, alpha),
            LossKind::CrossEntropy => cross_entropy_loss(weights, pairs, batch, alpha),
        }
    }

    /// Loss and gradient over every record of a dataset.
    pub fn evaluate_dataset(
        self,
        model: &LinearRewardModel,
        data: &PreferenceDataset,
        alpha: f64,
    ) -> Result<LossBatch> {
        model.check_dim(data.dim())?;
        let pairs = ComparisonSet::from_dataset(data, model.gamma());
        let all: Vec<usize> = (0..pairs.len()).collect();
        self.evaluate(model.weights(), &pairs, &all, alpha)
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft-tac" | "softtac" | "soft_tac" => Ok(LossKind::SoftTac),
            "cross-entropy" | "ce" | "cross_entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::param("loss", format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBatch {
    pub records: Vec<usize>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// `sech²(z) = 1 − tanh²(z)`, evaluated without cancellation for large |z|.
pub fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    1.0 / (c * c)
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn ce_target(label: Label) -> f64 {
    (label.as_f64() + 1.0) / 2.0
}

/// `1 − y tanh(z)`; lies in [0, 2].
pub fn soft_tac_sample_loss(z: f64, label: Label) -> f64 {
    1.0 - label.as_f64() * z.tanh()
}

/// `−[y_ce log σ(z) + (1 − y_ce) log(1 − σ(z))]` in softplus form.
pub fn cross_entropy_sample_loss(z: f64, label: Label) -> f64 {
    let t = ce_target(label);
    t * softplus(-z) + (1.0 - t) * softplus(z)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} must be finite and > 0")));
    }
    Ok(())
}

fn reduce(
    kind: LossKind,
    weights: &[f64],
    pairs: &ComparisonSet,
    batch: &[usize],
    alpha: f64,
) -> Result<LossBatch> {
    check_alpha(alpha)?;
    if weights.len() != pairs.dim() {
        return Err(Error::DimensionMismatch {
            expected: pairs.dim(),
            got: weights.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut value = 0.0;
    let mut gradient = vec![0.0; weights.len()];
    for &i in batch {
        let label = pairs.labels()[i];
        let z = alpha * pairs.delta(weights, i);
        value += kind.sample_loss(z, label);
        let scale = alpha * kind.sample_slope(z, label);
        if scale != 0.0 {
            for (g, d) in gradient.iter_mut().zip(pairs.diff(i)) {
                *g += scale * d;
            }
        }
    }
    let n = batch.len() as f64;
    gradient.iter_mut().for_each(|g| *g /= n);
    Ok(LossBatch {
        records: batch.to_vec(),
        value: value / n,
        gradient,
    })
}

/// `1 − mean(y tanh(α ΔG))` and its gradient.
pub fn soft_tac_loss(
    weights: &[f64],
    pairs: &ComparisonSet,
    batch: &[usize],
    alpha: f64,
) -> Result<LossBatch> {
    reduce(LossKind::SoftTac, weights, pairs, batch, alpha)
}

/// Bradley-Terry cross-entropy with `P(τ^i ≻ τ^j) = σ(α ΔG)`.
pub fn cross_entropy_loss(
    weights: &[f64],
    pairs: &ComparisonSet,
    batch: &[usize],
    alpha: f64,
) -> Result<LossBatch> {
    reduce(LossKind::CrossEntropy, weights, pairs, batch, alpha)
}

/// Gradient contributed by a single record.
pub fn per_sample_gradient(
    kind: LossKind,
    weights: &[f64],
    pairs: &ComparisonSet,
    index: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    Ok(reduce(kind, weights, pairs, &[index], alpha)?.gradient)
}

/// `Σ_{y ∈ {−1, 0, 1}} (1 − y tanh(α z))`, constant at 3.
pub fn soft_tac_label_sum(z: f64, alpha: f64) -> f64 {
    Label::ALL
        .iter()
        .map(|&y| soft_tac_sample_loss(alpha * z, y))
        .sum()
}
