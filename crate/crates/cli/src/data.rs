use std::path::PathBuf;

use clap::{Args, ValueEnum};
use tac_core::datalab::io::{save_dataset, DatasetPayload};
use tac_core::datalab::{corrupt_labels, generate_synthetic, toy_fixture, NoiseSpec, SyntheticSpec};
use tac_core::PreferenceDataset;

use crate::{environment, CliError, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fixture {
    /// Five pairs, the last one mislabelled.
    ToyNoisy,
    /// The same five pairs, all labelled by the true reward.
    ToyClean,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(value_enum)]
    name: Fixture,
    /// Directory for preferences.jsonl and trajectories.jsonl. Without it
    /// the dataset is printed as one JSON document.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 80)]
    trajectories: usize,
    #[arg(long, default_value_t = 300)]
    preferences: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of labels replaced by another label.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Skip pairs whose true return gap is smaller than this.
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long, short = 'o')]
    out: PathBuf,
}

fn write_files(data: &PreferenceDataset, gamma: f64, dir: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| environment(dir.display(), e))?;
    save_dataset(data, gamma, &dir.join("preferences.jsonl"), "trajectories.jsonl")
        .map_err(|e| environment(dir.display(), e))
}

pub fn fixture(args: FixtureArgs) -> Result<(), CliError> {
    let data = toy_fixture(matches!(args.name, Fixture::ToyNoisy));
    match args.out {
        Some(dir) => {
            write_files(&data, 1.0, &dir)?;
            println!("{}", dir.join("preferences.jsonl").display());
        }
        None => {
            let payload = DatasetPayload::from_dataset(&data, 1.0);
            let text = match args.format {
                Format::Json => serde_json::to_string_pretty(&payload),
                Format::Text => serde_json::to_string(&payload),
            }
            .expect("payload serializes");
            println!("{text}");
        }
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut spec = SyntheticSpec::realizable(args.dim, args.trajectories, args.preferences, args.seed);
    if let Some(gap) = args.min_gap {
        spec.min_abs_delta = gap;
    }
    let mut data = generate_synthetic(&spec)?;
    if args.noise > 0.0 {
        data = corrupt_labels(&data, &NoiseSpec::uniform(args.noise, args.seed.wrapping_add(1)))?.0;
    }
    write_files(&data, spec.gamma, &args.out)?;
    let weights: Vec<String> = spec.true_weights.iter().map(|w| w.to_string()).collect();
    println!("true_weights={}", weights.join(","));
    println!("preferences={}", args.out.join("preferences.jsonl").display());
    Ok(())
}
