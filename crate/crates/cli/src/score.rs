use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use tac_core::alignment::PairDiagnostic;
use tac_core::{tac, AlignmentReport, LinearRewardModel};

use crate::{environment, CliError, DataArgs, Format};

#[derive(Debug, Args)]
pub struct TacArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated weights, one per feature.
    #[arg(long, short = 'w', value_delimiter = ',', allow_hyphen_values = true, required = true)]
    weights: Vec<f64>,
    /// Discount; defaults to the trajectory header's gamma_default.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    tie_epsilon: f64,
    /// Also list every pair with its return difference and verdict.
    #[arg(long)]
    per_pair: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: &'static str,
    tac: f64,
    concordant: usize,
    discordant: usize,
    tied_only_induced: usize,
    tied_only_human: usize,
    tied_both: usize,
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_pair: Option<&'a [PairDiagnostic]>,
}

pub fn render(report: &AlignmentReport, per_pair: bool, format: Format) -> String {
    match format {
        Format::Json => {
            let json = JsonReport {
                schema: "tac-report/1",
                tac: report.tac,
                concordant: report.concordant,
                discordant: report.discordant,
                tied_only_induced: report.tied_only_induced,
                tied_only_human: report.tied_only_human,
                tied_both: report.tied_both,
                accuracy: report.accuracy(),
                per_pair: per_pair.then_some(report.per_pair.as_slice()),
            };
            let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = format!(
                "tac={:.6} P={} Q={} X0={} Y0={} tied={} accuracy={:.6}\n",
                report.tac,
                report.concordant,
                report.discordant,
                report.tied_only_induced,
                report.tied_only_human,
                report.tied_both,
                report.accuracy()
            );
            if per_pair {
                s.push_str("left\tright\tlabel\tdelta_return\tinduced\tclass\n");
                for p in &report.per_pair {
                    let _ = writeln!(
                        s,
                        "{}\t{}\t{}\t{}\t{}\t{:?}",
                        p.record.left, p.record.right, p.record.label, p.induced.delta_return, p.induced.verdict, p.class
                    );
                }
            }
            s
        }
    }
}

pub fn run(args: TacArgs) -> Result<(), CliError> {
    let loaded = args.data.load()?;
    let gamma = args.gamma.unwrap_or(loaded.gamma_default);
    let model = LinearRewardModel::new(args.weights, gamma)?;
    let report = tac(&loaded.dataset, &model, args.tie_epsilon)?;
    let text = render(&report, args.per_pair, args.format);
    match args.out {
        Some(path) => std::fs::write(&path, text).map_err(|e| environment(path.display(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
