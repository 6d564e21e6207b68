//! Named end-to-end experiments with pass/fail checks and raw tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{soft_tac, tac};
use crate::datalab::{
    ablation_preference_count, ablation_segment_length, corrupt_labels, format_count_table, format_length_table,
    format_sig6, generate_synthetic, sample_models, toy_fixture, NoiseSpec, SyntheticSpec, TOY_MISLABELED_INDEX,
};
use crate::envlab::{end_to_end, Gridworld, PipelineConfig};
use crate::error::{Error, Result};
use crate::losses::{per_sample_gradient, LossKind};
use crate::reward::{ComparisonSet, Label, LinearRewardModel, PreferenceDataset};
use crate::trainer::{grid_search, train, train_with_observer, InitKind, OptimizerKind, TrainConfig, STANDARD_LEARNING_RATES};

pub const STUDY_NAMES: [&str; 8] = [
    "toy-noisy",
    "toy-clean",
    "convergence",
    "noise-tolerance",
    "realizable",
    "ablation-count",
    "ablation-length",
    "gridworld-e2e",
];

/// Expert reward for the 7x7 gridworld, in standard feature order.
pub const GRID_EXPERT_WEIGHTS: [f64; 6] = [10.0, -10.0, -0.1, 0.5, -0.5, -1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub expected: String,
    pub observed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    /// Tab-separated, header first.
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl StudyReport {
    fn new(study: &str, checks: Vec<Check>, tables: Vec<Table>) -> Self {
        Self {
            study: study.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            tables,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &str, passed: bool, expected: impl Into<String>, observed: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        expected: expected.into(),
        observed: observed.into(),
    }
}

fn table(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Table {
    let mut body = header.join("\t");
    body.push('\n');
    for row in rows {
        body.push_str(&row.join("\t"));
        body.push('\n');
    }
    Table {
        name: name.to_string(),
        body,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn run_study(name: &str) -> Result<StudyReport> {
    match name {
        "toy-noisy" => toy_noisy(),
        "toy-clean" => toy_clean(),
        "convergence" => convergence(),
        "noise-tolerance" => noise_tolerance(),
        "realizable" => realizable(),
        "ablation-count" => ablation_count(),
        "ablation-length" => ablation_length(),
        "gridworld-e2e" => gridworld_e2e(),
        other => Err(Error::param(
            "study",
            format!("unknown study `{other}`; expected one of {}", STUDY_NAMES.join(", ")),
        )),
    }
}

/// Per-sample SGD on the five-item fixture from a zero weight.
pub fn toy_config(loss: LossKind) -> TrainConfig {
    TrainConfig {
        loss,
        alpha: 1.0,
        learning_rate: 0.1,
        batch_size: 1,
        max_epochs: 40,
        patience: 41,
        loss_delta: 0.0,
        optimizer: OptimizerKind::Sgd,
        init: InitKind::Zeros,
        seed: 0,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDynamics {
    /// Weight after each epoch, starting with the initial weight.
    pub weight_trace: Vec<f64>,
    pub final_weight: f64,
    /// Per-record gradient at the final weight.
    pub end_gradients: Vec<f64>,
    /// Gradient magnitude of every update taken on the mislabeled record.
    pub mislabeled_step_gradients: Vec<f64>,
    pub final_tac: f64,
}

pub fn toy_dynamics(loss: LossKind, noisy: bool) -> Result<ToyDynamics> {
    let data = toy_fixture(noisy);
    let config = toy_config(loss);
    let mut mislabeled_step_gradients = Vec::new();
    let run = train_with_observer(&data, &config, |ev| {
        if noisy && ev.batch == [TOY_MISLABELED_INDEX] {
            mislabeled_step_gradients.push(ev.gradient[0].abs());
        }
    })?;
    let mut weight_trace = vec![run.initial.weights[0]];
    weight_trace.extend(run.epoch_trace.iter().map(|m| m.weights[0]));
    let final_weight = *weight_trace.last().expect("initial weight present");
    let pairs = ComparisonSet::from_dataset(&data, config.gamma);
    let end_gradients = (0..pairs.len())
        .map(|i| Ok(per_sample_gradient(loss, &[final_weight], &pairs, i, config.alpha)?[0]))
        .collect::<Result<_>>()?;
    let model = LinearRewardModel::undiscounted(vec![final_weight])?;
    Ok(ToyDynamics {
        weight_trace,
        final_weight,
        end_gradients,
        mislabeled_step_gradients,
        final_tac: tac(&data, &model, 0.0)?.tac,
    })
}

fn toy_noisy() -> Result<StudyReport> {
    let soft = toy_dynamics(LossKind::SoftTac, true)?;
    let ce = toy_dynamics(LossKind::CrossEntropy, true)?;
    let bad = TOY_MISLABELED_INDEX;
    let correct_min = soft
        .end_gradients
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != bad)
        .map(|(_, g)| g.abs())
        .fold(f64::INFINITY, f64::min);
    let monotone = soft.weight_trace.windows(2).all(|w| w[1] >= w[0]);
    let ce_min_step = ce
        .mislabeled_step_gradients
        .iter()
        .copied()
        .chain([ce.end_gradients[bad].abs()])
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        check(
            "soft-tac final weight",
            (2.0..=2.6).contains(&soft.final_weight),
            "in [2.0, 2.6]",
            format_sig6(soft.final_weight),
        ),
        check("soft-tac weight trace monotone", monotone, "non-decreasing per epoch", monotone.to_string()),
        check(
            "soft-tac mislabeled end gradient",
            soft.end_gradients[bad].abs() <= 1e-3,
            "|g| <= 1e-3",
            format_sig6(soft.end_gradients[bad].abs()),
        ),
        check(
            "soft-tac correct end gradients",
            correct_min >= 0.01,
            "min |g| >= 0.01",
            format_sig6(correct_min),
        ),
        check(
            "cross-entropy mislabeled gradient",
            ce_min_step >= 1.0,
            "|g| >= 1.0 at every update and at the end",
            format_sig6(ce_min_step),
        ),
        check(
            "cross-entropy final weight",
            ce.final_weight < 1.0,
            "< 1.0",
            format_sig6(ce.final_weight),
        ),
    ];
    let data = toy_fixture(true);
    let tables = vec![
        table(
            "weight_trace",
            &["epoch", "soft_tac", "cross_entropy"],
            soft.weight_trace
                .iter()
                .zip(&ce.weight_trace)
                .enumerate()
                .map(|(e, (s, c))| vec![e.to_string(), format_sig6(*s), format_sig6(*c)]),
        ),
        table(
            "end_gradients",
            &["left", "right", "label", "soft_tac", "cross_entropy"],
            data.records().iter().enumerate().map(|(i, r)| {
                vec![
                    r.left.clone(),
                    r.right.clone(),
                    r.label.to_string(),
                    format_sig6(soft.end_gradients[i]),
                    format_sig6(ce.end_gradients[i]),
                ]
            }),
        ),
    ];
    Ok(StudyReport::new("toy-noisy", checks, tables))
}

fn toy_clean() -> Result<StudyReport> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for loss in [LossKind::SoftTac, LossKind::CrossEntropy] {
        let run = toy_dynamics(loss, false)?;
        checks.push(check(
            &format!("{} clean TAC", loss.name()),
            run.final_tac == 1.0,
            "1",
            format_sig6(run.final_tac),
        ));
        rows.push(vec![loss.name().to_string(), format_sig6(run.final_weight), format_sig6(run.final_tac)]);
    }
    let tables = vec![table("final", &["loss", "weight", "tac"], rows)];
    Ok(StudyReport::new("toy-clean", checks, tables))
}

pub const CONVERGENCE_ALPHAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// Tie-free labels from known weights with 20% of them flipped, scored by
/// those weights, so concordant and discordant pairs both occur.
pub fn convergence_dataset(seed: u64) -> Result<(PreferenceDataset, LinearRewardModel)> {
    let spec = SyntheticSpec {
        min_abs_delta: 0.01,
        ..SyntheticSpec::realizable(3, 40, 50, seed)
    };
    let clean = generate_synthetic(&spec)?;
    let (noisy, _) = corrupt_labels(&clean, &NoiseSpec::uniform(0.2, seed))?;
    let strict: Vec<usize> = (0..noisy.len())
        .filter(|&i| noisy.records()[i].label != Label::Tie)
        .collect();
    let model = LinearRewardModel::undiscounted(spec.true_weights)?;
    Ok((noisy.subset(&strict)?, model))
}

fn convergence() -> Result<StudyReport> {
    let gaps: Vec<Vec<f64>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let (data, model) = convergence_dataset(seed)?;
            let exact = tac(&data, &model, 0.0)?.tac;
            CONVERGENCE_ALPHAS
                .iter()
                .map(|&a| Ok((soft_tac(&data, &model, a)? - exact).abs()))
                .collect()
        })
        .collect::<Result<_>>()?;
    let non_monotone = gaps.iter().filter(|g| g.windows(2).any(|w| w[1] > w[0])).count();
    let worst = gaps.iter().map(|g| g[3]).fold(0.0, f64::max);
    let checks = vec![
        check(
            "gap non-increasing in alpha",
            non_monotone == 0,
            "0 of 100 datasets violate",
            format!("{non_monotone} of 100"),
        ),
        check("gap at alpha 1000", worst <= 0.01, "max <= 0.01", format_sig6(worst)),
    ];
    let rows = CONVERGENCE_ALPHAS.iter().enumerate().map(|(k, a)| {
        let col: Vec<f64> = gaps.iter().map(|g| g[k]).collect();
        vec![
            format_sig6(*a),
            format_sig6(mean(&col)),
            format_sig6(col.iter().copied().fold(0.0, f64::max)),
        ]
    });
    let tables = vec![table("gap_by_alpha", &["alpha", "mean_gap", "max_gap"], rows)];
    Ok(StudyReport::new("convergence", checks, tables))
}

pub fn noise_tolerance_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        min_abs_delta: 0.2,
        ..SyntheticSpec::realizable(4, 80, 500, seed)
    }
}

fn noise_tolerance() -> Result<StudyReport> {
    let rows: Vec<(u64, usize, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let clean = generate_synthetic(&noise_tolerance_spec(seed))?;
            let (noisy, mask) = corrupt_labels(&clean, &NoiseSpec::uniform(0.3, seed + 1000))?;
            let score = |loss| -> Result<f64> {
                let run = train(&noisy, &TrainConfig { loss, seed, ..TrainConfig::default() })?;
                Ok(tac(&clean, &run.model()?, 0.0)?.tac)
            };
            let flipped = mask.iter().filter(|&&m| m).count();
            Ok((seed, flipped, score(LossKind::SoftTac)?, score(LossKind::CrossEntropy)?))
        })
        .collect::<Result<_>>()?;
    let soft: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let ce: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (ms, mc) = (mean(&soft), mean(&ce));
    let checks = vec![
        check("soft-tac mean clean TAC", ms >= 0.95, ">= 0.95", format_sig6(ms)),
        check(
            "soft-tac vs cross-entropy",
            ms >= mc,
            format!("soft-tac mean >= cross-entropy mean ({})", format_sig6(mc)),
            format_sig6(ms),
        ),
    ];
    let tables = vec![table(
        "clean_tac",
        &["seed", "flipped", "soft_tac", "cross_entropy"],
        rows.iter().map(|r| vec![r.0.to_string(), r.1.to_string(), format_sig6(r.2), format_sig6(r.3)]),
    )];
    Ok(StudyReport::new("noise-tolerance", checks, tables))
}

/// Realizable data whose every pair is separated by at least 0.2 in return.
pub fn realizable_spec(dim: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        min_abs_delta: 0.2,
        ..SyntheticSpec::realizable(dim, 60, 148, seed)
    }
}

pub const REALIZABLE_BATCH_SIZES: [usize; 3] = [8, 16, 24];

fn realizable() -> Result<StudyReport> {
    let cases: Vec<(usize, u64)> = [2usize, 8].iter().flat_map(|&d| (0..20u64).map(move |s| (d, s))).collect();
    let rows: Vec<(usize, u64, f64, usize, f64, f64)> = cases
        .par_iter()
        .map(|&(dim, seed)| {
            let data = generate_synthetic(&realizable_spec(dim, seed))?;
            let base = TrainConfig { seed, ..TrainConfig::default() };
            let grid = grid_search(&data, &STANDARD_LEARNING_RATES, &REALIZABLE_BATCH_SIZES, &base)?;
            let run = grid.best();
            let loss = LossKind::SoftTac.evaluate_dataset(&run.model()?, &data, 1000.0)?.value;
            Ok((dim, seed, run.config.learning_rate, run.config.batch_size, run.best.tac, loss))
        })
        .collect::<Result<_>>()?;
    let below = rows.iter().filter(|r| r.4 < 1.0).count();
    let worst_loss = rows.iter().map(|r| r.5).fold(0.0, f64::max);
    let checks = vec![
        check("best TAC", below == 0, "1 in all 40 runs", format!("{below} runs below 1")),
        check("loss at alpha 1000", worst_loss < 1e-3, "< 1e-3 in all runs", format_sig6(worst_loss)),
    ];
    let tables = vec![table(
        "runs",
        &["dim", "seed", "learning_rate", "batch_size", "best_tac", "loss_alpha_1000"],
        rows.iter().map(|r| {
            vec![
                r.0.to_string(),
                r.1.to_string(),
                format_sig6(r.2),
                r.3.to_string(),
                format_sig6(r.4),
                format_sig6(r.5),
            ]
        }),
    )];
    Ok(StudyReport::new("realizable", checks, tables))
}

pub const ABLATION_SIZES: [usize; 4] = [25, 50, 75, 100];
pub const ABLATION_REPEATS: usize = 100;

/// 300 expert labels with 20% flips, so sampled models land away from TAC = 1.
pub fn ablation_dataset() -> Result<PreferenceDataset> {
    let clean = generate_synthetic(&SyntheticSpec::realizable(4, 80, 300, 7))?;
    Ok(corrupt_labels(&clean, &NoiseSpec::uniform(0.2, 70))?.0)
}

fn ablation_count() -> Result<StudyReport> {
    let data = ablation_dataset()?;
    let models = sample_models(4, 5, 1.0, 17)?;
    let rows = ablation_preference_count(&data, &ABLATION_SIZES, ABLATION_REPEATS, &models, 3)?;
    let mut spread_worst: f64 = 0.0;
    let mut se_failures = Vec::new();
    for m in 0..models.len() {
        let mine: Vec<_> = rows.iter().filter(|r| r.model_index == m).collect();
        let lo = mine.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
        let hi = mine.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
        spread_worst = spread_worst.max(hi - lo);
        let se = |size| mine.iter().find(|r| r.size == size).map(|r| r.stderr).unwrap_or(f64::NAN);
        if !(se(100) < se(25)) {
            se_failures.push(m);
        }
    }
    let checks = vec![
        check(
            "mean TAC spread across sizes",
            spread_worst <= 0.05,
            "<= 0.05 for every model",
            format_sig6(spread_worst),
        ),
        check(
            "stderr shrinks with size",
            se_failures.is_empty(),
            "SE(100) < SE(25) for every model",
            format!("violating models: {se_failures:?}"),
        ),
    ];
    let tables = vec![Table {
        name: "preference_count".into(),
        body: format_count_table(&rows),
    }];
    Ok(StudyReport::new("ablation-count", checks, tables))
}

fn ablation_length() -> Result<StudyReport> {
    let spec = SyntheticSpec::realizable(4, 80, 300, 8);
    let data = generate_synthetic(&spec)?;
    let model = LinearRewardModel::undiscounted(spec.true_weights.clone())?;
    let max = data.max_trajectory_len();
    let lengths: Vec<usize> = (1..=max + 2).collect();
    let rows = ablation_segment_length(&data, &lengths, &model)?;
    let full = tac(&data, &model, 0.0)?.tac;
    let mismatched: Vec<usize> = rows
        .iter()
        .filter(|r| r.length >= max && r.tac != Some(full))
        .map(|r| r.length)
        .collect();
    let checks = vec![check(
        "long segments match full trajectories",
        mismatched.is_empty(),
        format!("TAC = {} for every length >= {max}", format_sig6(full)),
        format!("mismatched lengths: {mismatched:?}"),
    )];
    let tables = vec![Table {
        name: "segment_length".into(),
        body: format_length_table(&rows),
    }];
    Ok(StudyReport::new("ablation-length", checks, tables))
}

fn gridworld_e2e() -> Result<StudyReport> {
    let world = Gridworld::open7();
    let report = end_to_end(&world, &GRID_EXPERT_WEIGHTS, &PipelineConfig::default())?;
    let checks = vec![
        check(
            "preferences",
            report.num_preferences == 148,
            "148",
            report.num_preferences.to_string(),
        ),
        check(
            "learned success rate",
            report.learned_success_rate == 1.0,
            "1",
            format_sig6(report.learned_success_rate),
        ),
        check(
            "matches expert planner",
            report.learned_success_rate == report.expert_success_rate,
            format!("expert success rate {}", format_sig6(report.expert_success_rate)),
            format_sig6(report.learned_success_rate),
        ),
    ];
    let mut body = String::from("key\tvalue\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), format_sig6);
    let weights: Vec<String> = report.learned_weights.iter().map(|w| format_sig6(*w)).collect();
    for (k, v) in [
        ("num_trajectories", report.num_trajectories.to_string()),
        ("num_preferences", report.num_preferences.to_string()),
        ("epochs_run", report.epochs_run.to_string()),
        ("learned_weights", weights.join(",")),
        ("train_tac", opt(report.train_tac)),
        ("clean_tac", opt(report.clean_tac)),
        ("learned_success_rate", format_sig6(report.learned_success_rate)),
        ("expert_success_rate", format_sig6(report.expert_success_rate)),
        ("policy_agreement", format_sig6(report.policy_agreement)),
        ("learned_policy_value", format_sig6(report.learned_policy_value)),
        ("expert_policy_value", format_sig6(report.expert_policy_value)),
    ] {
        let _ = writeln!(body, "{k}\t{v}");
    }
    let tables = vec![Table {
        name: "pipeline".into(),
        body,
    }];
    Ok(StudyReport::new("gridworld-e2e", checks, tables))
}
