use std::path::PathBuf;

use clap::Args;
use tac_core::studies::{run_study, StudyReport, STUDY_NAMES};

use crate::{environment, CliError, Format};

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Study name, or `all`.
    study: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write each table as `<study>.<table>.tsv` here.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

pub fn render_text(report: &StudyReport) -> String {
    let mut s = format!("== {} ==\n", report.study);
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{mark} {}: expected {}, observed {}\n", c.name, c.expected, c.observed));
    }
    for t in &report.tables {
        s.push_str(&format!("-- {} --\n{}", t.name, t.body));
        if !t.body.ends_with('\n') {
            s.push('\n');
        }
    }
    s
}

pub fn run(args: ReproduceArgs) -> Result<(), CliError> {
    let names: Vec<&str> = if args.study == "all" {
        STUDY_NAMES.to_vec()
    } else {
        vec![args.study.as_str()]
    };
    let mut reports = Vec::new();
    for name in names {
        let report = run_study(name)?;
        if args.format == Format::Text {
            print!("{}", render_text(&report));
        }
        reports.push(report);
    }
    if args.format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| environment(dir.display(), e))?;
        for r in &reports {
            for t in &r.tables {
                let path = dir.join(format!("{}.{}.tsv", r.study, t.name));
                std::fs::write(&path, &t.body).map_err(|e| environment(path.display(), e))?;
            }
        }
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.study.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(1, format!("failed: {}", failed.join(", "))))
    }
}
