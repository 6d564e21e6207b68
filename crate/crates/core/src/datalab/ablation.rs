use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::PairCounts;
use crate::error::{Error, Result};
use crate::reward::{ComparisonSet, LinearRewardModel, PreferenceDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountAblationRow {
    pub model_index: usize,
    pub size: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Subsets on which TAC was defined.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthAblationRow {
    pub length: usize,
    pub tac: Option<f64>,
}

/// `count` models with standard-normal weights.
pub fn sample_models(dim: usize, count: usize, gamma: f64, seed: u64) -> Result<Vec<LinearRewardModel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            LinearRewardModel::new(w, gamma)
        })
        .collect()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// TAC of every model on `repeats` random record subsets per size.
///
/// The subsets drawn for a size are shared by all models. Subsets on which a
/// model's TAC is undefined are left out of that row's statistics.
pub fn ablation_preference_count(
    data: &PreferenceDataset,
    sizes: &[usize],
    repeats: usize,
    models: &[LinearRewardModel],
    seed: u64,
) -> Result<Vec<CountAblationRow>> {
    if repeats < 2 {
        return Err(Error::param("repeats", "must be >= 2"));
    }
    if models.is_empty() {
        return Err(Error::param("models", "at least one model is required"));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > data.len()) {
        return Err(Error::param(
            "sizes",
            format!("subset size {s} outside 1..={}", data.len()),
        ));
    }
    let gamma = models[0].gamma();
    if models.iter().any(|m| m.gamma() != gamma) {
        return Err(Error::param("models", "all models must share one discount"));
    }
    for m in models {
        m.check_dim(data.dim())?;
    }
    let pairs = ComparisonSet::from_dataset(data, gamma);
    let deltas: Vec<Vec<f64>> = models.iter().map(|m| pairs.deltas(m.weights())).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (k, &size) in sizes.iter().enumerate() {
        let subsets: Vec<Vec<usize>> = (0..repeats)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ r as u64);
                sample(&mut rng, data.len(), size).into_vec()
            })
            .collect();
        let per_model: Vec<CountAblationRow> = deltas
            .par_iter()
            .enumerate()
            .map(|(m, d)| {
                let tacs: Vec<f64> = subsets
                    .iter()
                    .filter_map(|idx| {
                        let labels: Vec<_> = idx.iter().map(|&i| pairs.labels()[i]).collect();
                        let ds: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
                        PairCounts::from_deltas(&labels, &ds, 0.0).tac().ok()
                    })
                    .collect();
                let (mean, stderr) = mean_stderr(&tacs);
                CountAblationRow {
                    model_index: m,
                    size,
                    mean,
                    stderr,
                    n: tacs.len(),
                }
            })
            .collect();
        rows.extend(per_model);
    }
    rows.sort_by_key(|r| (r.model_index, r.size));
    Ok(rows)
}

/// TAC after truncating every trajectory to its first `L` steps, labels unchanged.
pub fn ablation_segment_length(
    data: &PreferenceDataset,
    lengths: &[usize],
    model: &LinearRewardModel,
) -> Result<Vec<LengthAblationRow>> {
    if lengths.contains(&0) {
        return Err(Error::param("lengths", "segment lengths must be positive"));
    }
    model.check_dim(data.dim())?;
    lengths
        .iter()
        .map(|&length| {
            let cut = data.map_trajectories(|t| t.truncated(length))?;
            let tac = crate::alignment::tac(&cut, model, 0.0).ok().map(|r| r.tac);
            Ok(LengthAblationRow { length, tac })
        })
        .collect()
}

/// Like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

const HEADER: &str = "parameter\tmean\tstderr\tn\n";

/// One tab-separated block per model, each headed by `# model <index>`.
pub fn format_count_table(rows: &[CountAblationRow]) -> String {
    let mut out = String::new();
    let mut current = None;
    for r in rows {
        if current != Some(r.model_index) {
            let _ = writeln!(out, "# model {}", r.model_index);
            out.push_str(HEADER);
            current = Some(r.model_index);
        }
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.size,
            format_sig6(r.mean),
            format_sig6(r.stderr),
            r.n
        );
    }
    out
}

pub fn format_length_table(rows: &[LengthAblationRow]) -> String {
    let mut out = String::from(HEADER);
    for r in rows {
        let (mean, n) = match r.tac {
            Some(t) => (format_sig6(t), 1),
            None => ("nan".to_string(), 0),
        };
        let _ = writeln!(out, "{}\t{}\t0\t{}", r.length, mean, n);
    }
    out
}
