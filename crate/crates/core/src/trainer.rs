//! Seeded mini-batch reward learning with early stopping and grid search.
//!
//! One run: initialise weights (standard normal by default, then clamp),
//! and per epoch shuffle the training records, take one optimizer step per
//! batch, clamp the weights, and score the epoch on the evaluation records
//! (TAC, accuracy, loss). An epoch counts as an improvement when
//!
//! * TAC ≥ best TAC and accuracy > best accuracy, or
//! * TAC ≥ best TAC and loss < best loss − `loss_delta`.
//!
//! Training stops after `patience` consecutive non-improving epochs or at
//! `max_epochs`, and the best snapshot is returned. The metrics of the
//! initial weights seed the best snapshot.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::PairCounts;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::reward::{ComparisonSet, LinearRewardModel, PreferenceDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    /// Plain stochastic gradient descent.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    StandardNormal,
    Zeros,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub loss_delta: f64,
    pub clip_low: Option<f64>,
    pub clip_high: Option<f64>,
    pub seed: u64,
    pub gamma: f64,
    pub optimizer: OptimizerKind,
    pub init: InitKind,
    pub tie_epsilon: f64,
    pub shuffle: bool,
    /// Fraction of records held out for early-stopping metrics; 0 scores on the training set.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::SoftTac,
            alpha: 1.0,
            learning_rate: 0.01,
            batch_size: 8,
            max_epochs: 500,
            patience: 50,
            loss_delta: 1e-4,
            clip_low: None,
            clip_high: None,
            seed: 0,
            gamma: 1.0,
            optimizer: OptimizerKind::Adam,
            init: InitKind::StandardNormal,
            tie_epsilon: 0.0,
            shuffle: true,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", format!("{} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::param("patience", "must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{} must be > 0", self.alpha)));
        }
        if !(self.loss_delta >= 0.0) {
            return Err(Error::param("loss_delta", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("{} outside [0, 1]", self.gamma)));
        }
        if !(self.tie_epsilon >= 0.0) {
            return Err(Error::param("tie_epsilon", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::param("validation_fraction", "must be in [0, 1)"));
        }
        if let (Some(lo), Some(hi)) = (self.clip_low, self.clip_high) {
            if lo > hi {
                return Err(Error::param("clip", format!("low {lo} > high {hi}")));
            }
        }
        Ok(())
    }

    pub fn clip_bounds(&self) -> ClipBounds {
        ClipBounds {
            low: self.clip_low,
            high: self.clip_high,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClipBounds {
    pub low: Option<f64>,
    pub high: Option<f64>,
}

impl ClipBounds {
    pub fn new(low: f64, high: f64) -> Self {
        Self {
            low: Some(low),
            high: Some(high),
        }
    }

    pub fn apply(&self, weights: &mut [f64]) {
        for w in weights {
            if let Some(lo) = self.low {
                *w = w.max(lo);
            }
            if let Some(hi) = self.high {
                *w = w.min(hi);
            }
        }
    }

    pub fn contains(&self, w: f64) -> bool {
        self.low.is_none_or(|lo| w >= lo) && self.high.is_none_or(|hi| w <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, weights: &mut [f64], gradient: &[f64], learning_rate: f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (k, w) in weights.iter_mut().enumerate() {
            let g = gradient[k];
            let m = &mut self.first_moment[k];
            let v = &mut self.second_moment[k];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

enum Optimizer {
    Adam(AdamState),
    Sgd,
}

impl Optimizer {
    fn new(kind: OptimizerKind, dim: usize) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(dim)),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    fn step(&mut self, weights: &mut [f64], gradient: &[f64], learning_rate: f64) {
        match self {
            Optimizer::Adam(state) => state.step(weights, gradient, learning_rate),
            Optimizer::Sgd => {
                for (w, g) in weights.iter_mut().zip(gradient) {
                    *w -= learning_rate * g;
                }
            }
        }
    }
}

/// Standard-normal draws from `rng`, clamped to `clip`.
pub fn init_weights_from_rng<R: Rng>(rng: &mut R, dim: usize, clip: ClipBounds) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    clip.apply(&mut weights);
    weights
}

pub fn init_weights(dim: usize, seed: u64, clip: ClipBounds) -> Vec<f64> {
    init_weights_from_rng(&mut ChaCha8Rng::seed_from_u64(seed), dim, clip)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// TAC on the evaluation records; 0 when every induced verdict is a tie.
    pub tac: f64,
    pub tac_defined: bool,
    pub accuracy: f64,
    pub loss: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub initial: EpochMetrics,
    /// One entry per completed epoch, epochs `1..=stopped_at_epoch`.
    pub epoch_trace: Vec<EpochMetrics>,
    pub best: EpochMetrics,
    pub final_weights: Vec<f64>,
    pub stopped_at_epoch: usize,
    pub last_improvement_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainRun {
    pub fn model(&self) -> Result<LinearRewardModel> {
        LinearRewardModel::new(self.final_weights.clone(), self.config.gamma)
    }
}

/// One optimizer update, reported to [`train_with_observer`] callbacks.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub step: usize,
    pub batch: &'a [usize],
    pub weights_before: &'a [f64],
    pub gradient: &'a [f64],
    pub weights_after: &'a [f64],
}

struct Evaluator<'a> {
    pairs: &'a ComparisonSet,
    indices: Vec<usize>,
    loss: LossKind,
    alpha: f64,
    tie_epsilon: f64,
}

impl Evaluator<'_> {
    fn metrics(&self, epoch: usize, weights: &[f64]) -> Result<EpochMetrics> {
        let deltas: Vec<f64> = self.indices.iter().map(|&i| self.pairs.delta(weights, i)).collect();
        let labels: Vec<_> = self.indices.iter().map(|&i| self.pairs.labels()[i]).collect();
        let counts = PairCounts::from_deltas(&labels, &deltas, self.tie_epsilon);
        let (tac, tac_defined) = match counts.tac() {
            Ok(t) => (t, true),
            Err(Error::DegenerateDataset { human_strict, .. }) if human_strict > 0 => (0.0, false),
            Err(e) => return Err(e),
        };
        let loss = self.loss.evaluate(weights, self.pairs, &self.indices, self.alpha)?.value;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("loss {loss} at weights {weights:?}"),
            });
        }
        Ok(EpochMetrics {
            epoch,
            tac,
            tac_defined,
            accuracy: counts.accuracy()?,
            loss,
            weights: weights.to_vec(),
        })
    }
}

fn improved(candidate: &EpochMetrics, best: &EpochMetrics, loss_delta: f64) -> bool {
    candidate.tac >= best.tac
        && (candidate.accuracy > best.accuracy || candidate.loss < best.loss - loss_delta)
}

pub fn train(data: &PreferenceDataset, config: &TrainConfig) -> Result<TrainRun> {
    train_with_observer(data, config, |_| {})
}

pub fn train_with_observer(
    data: &PreferenceDataset,
    config: &TrainConfig,
    observer: impl FnMut(&StepEvent<'_>),
) -> Result<TrainRun> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs = ComparisonSet::from_dataset(data, config.gamma);
    train_on_pairs(&pairs, config, observer)
}

/// Training over a precomputed comparison table.
pub fn train_on_pairs(
    pairs: &ComparisonSet,
    config: &TrainConfig,
    mut observer: impl FnMut(&StepEvent<'_>),
) -> Result<TrainRun> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = pairs.dim();
    let clip = config.clip_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut weights = match &config.init {
        InitKind::StandardNormal => init_weights_from_rng(&mut rng, dim, clip),
        InitKind::Zeros => vec![0.0; dim],
        InitKind::Fixed(w) => {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: w.len(),
                });
            }
            let mut w = w.clone();
            clip.apply(&mut w);
            w
        }
    };

    let (mut train_idx, eval_idx) = split(pairs.len(), config.validation_fraction, config.seed);
    let evaluator = Evaluator {
        pairs,
        indices: eval_idx,
        loss: config.loss,
        alpha: config.alpha,
        tie_epsilon: config.tie_epsilon,
    };

    let initial = evaluator.metrics(0, &weights)?;
    let mut best = initial.clone();
    let mut last_improvement = 0;
    let mut stale = 0;
    let mut trace = Vec::new();
    let mut optimizer = Optimizer::new(config.optimizer, dim);
    let mut step = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        if config.shuffle {
            train_idx.shuffle(&mut rng);
        }
        for batch in train_idx.chunks(config.batch_size) {
            let grad = config.loss.evaluate(&weights, pairs, batch, config.alpha)?.gradient;
            let before = weights.clone();
            optimizer.step(&mut weights, &grad, config.learning_rate);
            clip.apply(&mut weights);
            if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: format!("weight became {w}"),
                });
            }
            step += 1;
            observer(&StepEvent {
                epoch,
                step,
                batch,
                weights_before: &before,
                gradient: &grad,
                weights_after: &weights,
            });
        }

        let metrics = evaluator.metrics(epoch, &weights)?;
        if improved(&metrics, &best, config.loss_delta) {
            best = metrics.clone();
            last_improvement = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        trace.push(metrics);
        if stale >= config.patience {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    Ok(TrainRun {
        config: config.clone(),
        initial,
        stopped_at_epoch: trace.len(),
        epoch_trace: trace,
        final_weights: best.weights.clone(),
        best,
        last_improvement_epoch: last_improvement,
        stop_reason,
    })
}

fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..n).collect();
    let held = ((n as f64) * fraction).round() as usize;
    if held == 0 || n < 2 {
        return (all.clone(), all);
    }
    let held = held.min(n - 1);
    let mut order = all;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5a11));
    let eval = order.split_off(n - held);
    order.sort_unstable();
    let mut eval = eval;
    eval.sort_unstable();
    (order, eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub run: Option<TrainRun>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub cells: Vec<GridCell>,
    pub best_index: usize,
}

impl GridSearch {
    pub fn best(&self) -> &TrainRun {
        self.cells[self.best_index]
            .run
            .as_ref()
            .expect("best cell always holds a run")
    }
}

/// Learning rates swept for reward learning.
pub const STANDARD_LEARNING_RATES: [f64; 6] = [0.01, 0.03, 0.05, 0.0001, 0.0003, 0.0005];

fn better(a: &GridCell, b: &GridCell) -> bool {
    let (ra, rb) = match (&a.run, &b.run) {
        (Some(x), Some(y)) => (&x.best, &y.best),
        (Some(_), None) => return true,
        _ => return false,
    };
    if ra.tac != rb.tac {
        return ra.tac > rb.tac;
    }
    if ra.accuracy != rb.accuracy {
        return ra.accuracy > rb.accuracy;
    }
    if ra.loss != rb.loss {
        return ra.loss < rb.loss;
    }
    if a.learning_rate != b.learning_rate {
        return a.learning_rate < b.learning_rate;
    }
    a.batch_size < b.batch_size
}

/// Trains every (learning rate, batch size) cell with the base config's seed.
pub fn grid_search(
    data: &PreferenceDataset,
    learning_rates: &[f64],
    batch_sizes: &[usize],
    base: &TrainConfig,
) -> Result<GridSearch> {
    if learning_rates.is_empty() || batch_sizes.is_empty() {
        return Err(Error::param("grid", "needs at least one learning rate and batch size"));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs = ComparisonSet::from_dataset(data, base.gamma);
    let combos: Vec<(f64, usize)> = learning_rates
        .iter()
        .flat_map(|&lr| batch_sizes.iter().map(move |&b| (lr, b)))
        .collect();
    let cells: Vec<GridCell> = combos
        .par_iter()
        .map(|&(learning_rate, batch_size)| {
            let config = TrainConfig {
                learning_rate,
                batch_size,
                ..base.clone()
            };
            match train_on_pairs(&pairs, &config, |_| {}) {
                Ok(run) => GridCell {
                    learning_rate,
                    batch_size,
                    run: Some(run),
                    error: None,
                },
                Err(e) => GridCell {
                    learning_rate,
                    batch_size,
                    run: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut best_index = 0;
    for i in 1..cells.len() {
        if better(&cells[i], &cells[best_index]) {
            best_index = i;
        }
    }
    if cells[best_index].run.is_none() {
        return Err(Error::InvalidDataset(format!(
            "every grid cell failed; first error: {}",
            cells[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(GridSearch { cells, best_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalab::toy_fixture;

    #[test]
    fn init_is_seeded_and_clamped() {
        let a = init_weights(16, 7, ClipBounds::default());
        assert_eq!(a, init_weights(16, 7, ClipBounds::default()));
        assert_ne!(a, init_weights(16, 8, ClipBounds::default()));
        let clipped = init_weights(64, 7, ClipBounds::new(0.0, 15.0));
        assert!(clipped.iter().all(|&w| (0.0..=15.0).contains(&w)));
        let raw = init_weights(64, 7, ClipBounds::default());
        for (r, c) in raw.iter().zip(&clipped) {
            if *r < 0.0 {
                assert_eq!(*c, 0.0);
            }
        }
        let mut v = vec![-0.7];
        ClipBounds::new(0.0, 15.0).apply(&mut v);
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn init_moments() {
        let draws = init_weights(10_000, 42, ClipBounds::default());
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut state = AdamState::new(2);
        let mut w = vec![0.0, 0.0];
        state.step(&mut w, &[3.0, -0.5], 0.1);
        assert!((w[0] + 0.1).abs() < 1e-8 && (w[1] - 0.1).abs() < 1e-8);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { learning_rate: 0.0, ..ok.clone() },
            TrainConfig { batch_size: 0, ..ok.clone() },
            TrainConfig { clip_low: Some(2.0), clip_high: Some(1.0), ..ok.clone() },
            TrainConfig { alpha: -1.0, ..ok.clone() },
            TrainConfig { validation_fraction: 1.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"loss":"cross-entropy","learning_rate":0.05}"#).unwrap();
        assert_eq!(cfg.loss, LossKind::CrossEntropy);
        assert_eq!(cfg.patience, 50);
        assert_eq!(cfg.init, InitKind::StandardNormal);
        let fixed: TrainConfig = serde_json::from_str(r#"{"init":{"fixed":[0.5]}}"#).unwrap();
        assert_eq!(fixed.init, InitKind::Fixed(vec![0.5]));
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let cfg = TrainConfig { max_epochs: 0, seed: 3, ..Default::default() };
        let run = train(&toy_fixture(true), &cfg).unwrap();
        assert_eq!(run.stopped_at_epoch, 0);
        assert!(run.epoch_trace.is_empty());
        assert_eq!(run.final_weights, init_weights(1, 3, ClipBounds::default()));
        assert_eq!(run.best, run.initial);
    }

    #[test]
    fn improvement_rule() {
        let base = EpochMetrics { epoch: 0, tac: 0.5, tac_defined: true, accuracy: 0.7, loss: 0.4, weights: vec![] };
        let m = |tac, accuracy, loss| EpochMetrics { tac, accuracy, loss, ..base.clone() };
        assert!(improved(&m(0.5, 0.71, 0.5), &base, 1e-4));
        assert!(improved(&m(0.5, 0.7, 0.3998), &base, 1e-4));
        assert!(!improved(&m(0.5, 0.7, 0.39995), &base, 1e-4));
        assert!(!improved(&m(0.49, 0.9, 0.1), &base, 1e-4));
        assert!(improved(&m(0.6, 0.7, 0.3), &base, 1e-4));
        assert!(!improved(&m(0.6, 0.7, 0.4), &base, 1e-4));
    }

    #[test]
    fn early_stop_bookkeeping() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 2,
            max_epochs: 2000,
            patience: 5,
            ..Default::default()
        };
        let run = train(&toy_fixture(false), &cfg).unwrap();
        assert_eq!(run.stop_reason, StopReason::EarlyStop);
        assert_eq!(run.stopped_at_epoch - run.last_improvement_epoch, cfg.patience);
        assert_eq!(run.epoch_trace.len(), run.stopped_at_epoch);
        assert_eq!(run.final_weights, run.best.weights);
    }

    #[test]
    fn clamping_holds_for_every_snapshot() {
        let cfg = TrainConfig {
            learning_rate: 0.5,
            batch_size: 1,
            max_epochs: 30,
            clip_low: Some(-0.25),
            clip_high: Some(0.75),
            ..Default::default()
        };
        let run = train(&toy_fixture(true), &cfg).unwrap();
        let clip = cfg.clip_bounds();
        assert!(run.epoch_trace.iter().flat_map(|m| &m.weights).all(|&w| clip.contains(w)));
        assert!(run.initial.weights.iter().all(|&w| clip.contains(w)));
    }

    #[test]
    fn validation_split_holds_out_records() {
        let (train_idx, eval_idx) = split(10, 0.3, 1);
        assert_eq!(eval_idx.len(), 3);
        assert_eq!(train_idx.len(), 7);
        assert!(eval_idx.iter().all(|i| !train_idx.contains(i)));
        let (t, e) = split(10, 0.0, 1);
        assert_eq!(t, e);
    }

    #[test]
    fn grid_of_one_cell_is_train() {
        let cfg = TrainConfig { learning_rate: 0.03, batch_size: 2, max_epochs: 50, ..Default::default() };
        let data = toy_fixture(false);
        let grid = grid_search(&data, &[0.03], &[2], &cfg).unwrap();
        assert_eq!(grid.best(), &train(&data, &cfg).unwrap());
    }

    #[test]
    fn grid_tie_break_prefers_smaller_learning_rate() {
        let run = train(&toy_fixture(false), &TrainConfig { max_epochs: 0, ..Default::default() }).unwrap();
        let cell = |lr| GridCell { learning_rate: lr, batch_size: 8, run: Some(run.clone()), error: None };
        assert!(better(&cell(0.0001), &cell(0.05)));
        assert!(!better(&cell(0.05), &cell(0.0001)));
        let failed = GridCell { learning_rate: 0.0001, batch_size: 8, run: None, error: Some("x".into()) };
        assert!(better(&cell(0.05), &failed));
        // with max_epochs = 0 every cell shares the initial snapshot
        let grid = grid_search(&toy_fixture(false), &[0.05, 0.0001, 0.01], &[8], &TrainConfig { max_epochs: 0, ..Default::default() }).unwrap();
        assert_eq!(grid.cells[grid.best_index].learning_rate, 0.0001);
    }

    #[test]
    fn grid_marks_failed_cells() {
        let base = TrainConfig { max_epochs: 5, ..Default::default() };
        let grid = grid_search(&toy_fixture(false), &[0.01, -1.0], &[2], &base).unwrap();
        assert_eq!(grid.cells.len(), 2);
        assert!(grid.cells[1].error.is_some());
        assert_eq!(grid.best_index, 0);
        assert!(grid_search(&toy_fixture(false), &[], &[2], &base).is_err());
    }
}
