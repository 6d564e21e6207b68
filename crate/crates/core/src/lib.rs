//! Trajectory alignment coefficient toolkit: linear reward models, rank
//! alignment between human preferences and reward-induced preferences,
//! differentiable training losses, a trainer, synthetic data and a small
//! gridworld for end-to-end checks.

pub mod alignment;
pub mod datalab;
pub mod envlab;
pub mod error;
pub mod losses;
pub mod reward;
pub mod studies;
pub mod trainer;

pub use alignment::{accuracy, soft_tac, tac, AlignmentReport, PairCounts};
pub use error::{Error, Result};
pub use losses::LossKind;
pub use reward::{ComparisonSet, Label, LinearRewardModel, PreferenceDataset, PreferenceRecord, Trajectory};
pub use trainer::{grid_search, train, TrainConfig, TrainRun};
