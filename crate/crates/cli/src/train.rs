use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use tac_core::trainer::{
    grid_search, train, EpochMetrics, GridCell, InitKind, OptimizerKind, StopReason, TrainConfig, TrainRun,
    STANDARD_LEARNING_RATES,
};
use tac_core::LossKind;

use crate::{environment, CliError, DataArgs, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Normal,
    Zeros,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// soft-tac or cross-entropy.
    #[arg(long, default_value = "soft-tac")]
    loss: LossKind,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "lr", default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long = "batch", default_value_t = 8)]
    batch_size: usize,
    #[arg(long = "epochs", default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    /// Minimum loss drop that counts as an improvement.
    #[arg(long, default_value_t = 1e-4)]
    loss_delta: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: Optimizer,
    #[arg(long, value_enum, default_value = "normal")]
    init: Init,
    #[arg(long, allow_hyphen_values = true)]
    clip_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    clip_high: Option<f64>,
    /// Discount; defaults to the trajectory header's gamma_default.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    tie_epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Learning rates to sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    grid_lr: Vec<f64>,
    /// Batch sizes to sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    grid_batch: Vec<usize>,
    /// Sweep the standard six learning rates.
    #[arg(long, conflicts_with = "grid_lr")]
    standard_grid: bool,
    /// Directory for weights.json, trace.tsv and, with a grid, grid.tsv.
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Serialize)]
struct GridChoice {
    learning_rate: f64,
    batch_size: usize,
}

#[derive(Serialize)]
struct WeightsArtifact<'a> {
    schema: &'static str,
    loss: LossKind,
    weights: &'a [f64],
    gamma: f64,
    best_epoch: usize,
    stopped_at_epoch: usize,
    stop_reason: StopReason,
    best: &'a EpochMetrics,
    config: &'a TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_cell: Option<GridChoice>,
}

fn trace_table(run: &TrainRun) -> String {
    let mut s = String::from("epoch\ttac\ttac_defined\taccuracy\tloss");
    for k in 0..run.final_weights.len() {
        let _ = write!(s, "\tw{k}");
    }
    s.push('\n');
    for m in std::iter::once(&run.initial).chain(&run.epoch_trace) {
        let _ = write!(s, "{}\t{}\t{}\t{}\t{}", m.epoch, m.tac, m.tac_defined, m.accuracy, m.loss);
        for w in &m.weights {
            let _ = write!(s, "\t{w}");
        }
        s.push('\n');
    }
    s
}

fn grid_table(cells: &[GridCell], best: usize) -> String {
    let mut s = String::from("learning_rate\tbatch_size\tstatus\tbest_tac\tbest_accuracy\tbest_loss\tchosen\n");
    for (i, c) in cells.iter().enumerate() {
        let chosen = i == best;
        match &c.run {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "{}\t{}\tok\t{}\t{}\t{}\t{chosen}",
                    c.learning_rate, c.batch_size, r.best.tac, r.best.accuracy, r.best.loss
                );
            }
            None => {
                let _ = writeln!(s, "{}\t{}\tfailed\t\t\t\t{chosen}", c.learning_rate, c.batch_size);
            }
        }
    }
    s
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| environment(path.display(), e))
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let loaded = args.data.load()?;
    let config = TrainConfig {
        loss: args.loss,
        alpha: args.alpha,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        loss_delta: args.loss_delta,
        clip_low: args.clip_low,
        clip_high: args.clip_high,
        seed: args.seed,
        gamma: args.gamma.unwrap_or(loaded.gamma_default),
        optimizer: match args.optimizer {
            Optimizer::Adam => OptimizerKind::Adam,
            Optimizer::Sgd => OptimizerKind::Sgd,
        },
        init: match args.init {
            Init::Normal => InitKind::StandardNormal,
            Init::Zeros => InitKind::Zeros,
        },
        tie_epsilon: args.tie_epsilon,
        validation_fraction: args.validation_fraction,
        ..TrainConfig::default()
    };
    config.validate()?;
    std::fs::create_dir_all(&args.out).map_err(|e| environment(args.out.display(), e))?;

    let gridded = args.standard_grid || !args.grid_lr.is_empty() || !args.grid_batch.is_empty();
    let (run, choice) = if gridded {
        let lrs = if args.standard_grid {
            STANDARD_LEARNING_RATES.to_vec()
        } else if args.grid_lr.is_empty() {
            vec![config.learning_rate]
        } else {
            args.grid_lr.clone()
        };
        let batches = if args.grid_batch.is_empty() {
            vec![config.batch_size]
        } else {
            args.grid_batch.clone()
        };
        let search = grid_search(&loaded.dataset, &lrs, &batches, &config)?;
        for c in search.cells.iter().filter(|c| c.run.is_none()) {
            eprintln!(
                "grid cell lr={} batch={} failed: {}",
                c.learning_rate,
                c.batch_size,
                c.error.as_deref().unwrap_or("unknown")
            );
        }
        write(&args.out, "grid.tsv", &grid_table(&search.cells, search.best_index))?;
        let best = &search.cells[search.best_index];
        let choice = GridChoice {
            learning_rate: best.learning_rate,
            batch_size: best.batch_size,
        };
        (search.best().clone(), Some(choice))
    } else {
        (train(&loaded.dataset, &config)?, None)
    };

    let artifact = WeightsArtifact {
        schema: "tac-train/1",
        loss: run.config.loss,
        weights: &run.final_weights,
        gamma: run.config.gamma,
        best_epoch: run.best.epoch,
        stopped_at_epoch: run.stopped_at_epoch,
        stop_reason: run.stop_reason,
        best: &run.best,
        config: &run.config,
        grid_cell: choice,
    };
    let mut json = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
    json.push('\n');
    write(&args.out, "weights.json", &json)?;
    write(&args.out, "trace.tsv", &trace_table(&run))?;

    match args.format {
        Format::Json => print!("{json}"),
        Format::Text => {
            let weights: Vec<String> = run.final_weights.iter().map(|w| format!("{w:.6}")).collect();
            println!("weights={}", weights.join(","));
            println!(
                "best_epoch={} stopped_at_epoch={} tac={:.6} accuracy={:.6} loss={:.6}",
                run.best.epoch, run.stopped_at_epoch, run.best.tac, run.best.accuracy, run.best.loss
            );
            println!("artifacts={}", args.out.display());
        }
    }
    Ok(())
}
