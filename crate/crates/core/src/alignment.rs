//! Induced preferences and the Trajectory Alignment Coefficient.
//!
//! TAC is Kendall's Tau-b between the human preference dataset and the
//! preferences a candidate reward induces over the same pairs:
//!
//! ```text
//! tac = (P − Q) / sqrt((P + Q + X₀)(P + Q + Y₀))
//! ```
//!
//! where P/Q count concordant/discordant strict pairs, X₀ counts pairs tied
//! only under the reward, and Y₀ pairs tied only by the human. Pairs tied on
//! both sides are reported but enter none of the four counts.
//!
//! Soft-TAC replaces the sign comparison with `y · tanh(α ΔG)` averaged over
//! all records, which tends to TAC as α grows on tie-free data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{ComparisonSet, Label, LinearRewardModel, PreferenceDataset, PreferenceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedPreference {
    pub left: String,
    pub right: String,
    pub delta_return: f64,
    pub verdict: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Concordant,
    Discordant,
    TiedInducedOnly,
    TiedHumanOnly,
    TiedBoth,
}

impl PairClass {
    pub fn classify(human: Label, induced: Label) -> Self {
        match (human.is_strict(), induced.is_strict()) {
            (true, true) if human == induced => PairClass::Concordant,
            (true, true) => PairClass::Discordant,
            (true, false) => PairClass::TiedInducedOnly,
            (false, true) => PairClass::TiedHumanOnly,
            (false, false) => PairClass::TiedBoth,
        }
    }
}

/// Concordance counts underlying a TAC score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub concordant: usize,
    pub discordant: usize,
    pub tied_only_induced: usize,
    pub tied_only_human: usize,
    pub tied_both: usize,
}

impl PairCounts {
    pub fn add(&mut self, class: PairClass) {
        match class {
            PairClass::Concordant => self.concordant += 1,
            PairClass::Discordant => self.discordant += 1,
            PairClass::TiedInducedOnly => self.tied_only_induced += 1,
            PairClass::TiedHumanOnly => self.tied_only_human += 1,
            PairClass::TiedBoth => self.tied_both += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.concordant
            + self.discordant
            + self.tied_only_induced
            + self.tied_only_human
            + self.tied_both
    }

    /// Pairs on which the human expresses a strict preference.
    pub fn human_strict(&self) -> usize {
        self.concordant + self.discordant + self.tied_only_induced
    }

    /// Pairs on which the reward induces a strict preference.
    pub fn induced_strict(&self) -> usize {
        self.concordant + self.discordant + self.tied_only_human
    }

    pub fn tac(&self) -> Result<f64> {
        let (hs, is) = (self.human_strict(), self.induced_strict());
        if hs == 0 || is == 0 {
            return Err(Error::DegenerateDataset {
                human_strict: hs,
                induced_strict: is,
            });
        }
        let numerator = self.concordant as f64 - self.discordant as f64;
        Ok(numerator / ((hs as f64) * (is as f64)).sqrt())
    }

    /// Fraction of records whose induced verdict equals the human label.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok((self.concordant + self.tied_both) as f64 / total as f64)
    }

    pub fn from_deltas(labels: &[Label], deltas: &[f64], tie_epsilon: f64) -> Self {
        let mut counts = PairCounts::default();
        for (&label, &delta) in labels.iter().zip(deltas) {
            counts.add(PairClass::classify(label, Label::from_delta(delta, tie_epsilon)));
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub record: PreferenceRecord,
    pub induced: InducedPreference,
    pub class: PairClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub tac: f64,
    pub concordant: usize,
    pub discordant: usize,
    pub tied_only_induced: usize,
    pub tied_only_human: usize,
    pub tied_both: usize,
    pub per_pair: Vec<PairDiagnostic>,
}

impl AlignmentReport {
    pub fn counts(&self) -> PairCounts {
        PairCounts {
            concordant: self.concordant,
            discordant: self.discordant,
            tied_only_induced: self.tied_only_induced,
            tied_only_human: self.tied_only_human,
            tied_both: self.tied_both,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.counts().accuracy().unwrap_or(0.0)
    }
}

fn check_tie_epsilon(tie_epsilon: f64) -> Result<()> {
    if !(tie_epsilon >= 0.0 && tie_epsilon.is_finite()) {
        return Err(Error::param("tie_epsilon", format!("{tie_epsilon} must be finite and >= 0")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} must be finite and > 0")));
    }
    Ok(())
}

fn deltas_for(model: &LinearRewardModel, data: &PreferenceDataset) -> Result<Vec<f64>> {
    model.check_dim(data.dim())?;
    ComparisonSet::from_dataset(data, model.gamma()).deltas(model.weights())
}

pub fn induce_preferences(
    model: &LinearRewardModel,
    data: &PreferenceDataset,
    tie_epsilon: f64,
) -> Result<Vec<InducedPreference>> {
    check_tie_epsilon(tie_epsilon)?;
    let deltas = deltas_for(model, data)?;
    Ok(data
        .records()
        .iter()
        .zip(deltas)
        .map(|(rec, delta)| InducedPreference {
            left: rec.left.clone(),
            right: rec.right.clone(),
            delta_return: delta,
            verdict: Label::from_delta(delta, tie_epsilon),
        })
        .collect())
}

pub fn tac(
    human: &PreferenceDataset,
    model: &LinearRewardModel,
    tie_epsilon: f64,
) -> Result<AlignmentReport> {
    let induced = induce_preferences(model, human, tie_epsilon)?;
    let mut counts = PairCounts::default();
    let per_pair: Vec<PairDiagnostic> = human
        .records()
        .iter()
        .zip(induced)
        .map(|(rec, ind)| {
            let class = PairClass::classify(rec.label, ind.verdict);
            counts.add(class);
            PairDiagnostic {
                record: rec.clone(),
                induced: ind,
                class,
            }
        })
        .collect();
    Ok(AlignmentReport {
        tac: counts.tac()?,
        concordant: counts.concordant,
        discordant: counts.discordant,
        tied_only_induced: counts.tied_only_induced,
        tied_only_human: counts.tied_only_human,
        tied_both: counts.tied_both,
        per_pair,
    })
}

/// Mean of `y · tanh(α ΔG)` over precomputed return differences.
pub fn soft_tac_from_deltas(labels: &[Label], deltas: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = labels
        .iter()
        .zip(deltas)
        .map(|(y, d)| y.as_f64() * (alpha * d).tanh())
        .sum();
    Ok(sum / labels.len() as f64)
}

pub fn soft_tac(human: &PreferenceDataset, model: &LinearRewardModel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let deltas = deltas_for(model, human)?;
    let labels: Vec<Label> = human.records().iter().map(|r| r.label).collect();
    soft_tac_from_deltas(&labels, &deltas, alpha)
}

pub fn accuracy(human: &PreferenceDataset, model: &LinearRewardModel, tie_epsilon: f64) -> Result<f64> {
    check_tie_epsilon(tie_epsilon)?;
    if human.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let deltas = deltas_for(model, human)?;
    let labels: Vec<Label> = human.records().iter().map(|r| r.label).collect();
    PairCounts::from_deltas(&labels, &deltas, tie_epsilon).accuracy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalab::toy_fixture;
    use crate::reward::Trajectory;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scalar_dataset(values: &[f64], pairs: &[(usize, usize, Label)]) -> PreferenceDataset {
        let ts = values
            .iter()
            .enumerate()
            .map(|(i, v)| Trajectory::new(format!("t{i}"), vec![vec![*v]]).unwrap())
            .collect();
        let recs = pairs
            .iter()
            .map(|&(a, b, l)| PreferenceRecord::new(format!("t{a}"), format!("t{b}"), l))
            .collect();
        PreferenceDataset::new(ts, recs).unwrap()
    }

    fn unit() -> LinearRewardModel {
        LinearRewardModel::undiscounted(vec![1.0]).unwrap()
    }

    #[test]
    fn induced_verdicts() {
        let data = scalar_dataset(&[5.0, 3.0, 3.0], &[(0, 1, Label::Tie), (1, 2, Label::Tie)]);
        let ind = induce_preferences(&unit(), &data, 0.0).unwrap();
        assert_eq!(ind[0].verdict, Label::LeftPreferred);
        assert_eq!(ind[0].delta_return, 2.0);
        assert_eq!(ind[1].verdict, Label::Tie);

        let toy = toy_fixture(true);
        let ind = induce_preferences(&unit(), &toy, 0.0).unwrap();
        let mislabeled = ind.iter().find(|p| p.left == "item2" && p.right == "item4").unwrap();
        assert_eq!(mislabeled.verdict, Label::RightPreferred);
        assert_eq!(mislabeled.delta_return, -2.0);
    }

    #[test]
    fn tac_complete_agreement_and_disagreement() {
        let pairs = [
            (1, 0, Label::LeftPreferred),
            (2, 1, Label::LeftPreferred),
            (0, 3, Label::RightPreferred),
            (3, 2, Label::LeftPreferred),
        ];
        let data = scalar_dataset(&[0.0, 1.0, 2.0, 3.0], &pairs);
        assert_eq!(tac(&data, &unit(), 0.0).unwrap().tac, 1.0);
        let neg = LinearRewardModel::undiscounted(vec![-1.0]).unwrap();
        assert_eq!(tac(&data, &neg, 0.0).unwrap().tac, -1.0);
    }

    #[test]
    fn tac_noisy_toy_hand_count() {
        // four concordant pairs plus the mislabeled (2,4): (4-1)/sqrt(5*5)
        let report = tac(&toy_fixture(true), &unit(), 0.0).unwrap();
        assert_eq!((report.concordant, report.discordant), (4, 1));
        assert_abs_diff_eq!(report.tac, 0.6, epsilon = 1e-15);
        let big = LinearRewardModel::undiscounted(vec![37.5]).unwrap();
        assert_abs_diff_eq!(tac(&toy_fixture(true), &big, 0.0).unwrap().tac, 0.6, epsilon = 1e-15);
        assert_eq!(tac(&toy_fixture(false), &unit(), 0.0).unwrap().tac, 1.0);
    }

    #[test]
    fn tac_degenerate_is_an_error() {
        let zero = LinearRewardModel::undiscounted(vec![0.0]).unwrap();
        assert!(matches!(
            tac(&toy_fixture(true), &zero, 0.0),
            Err(Error::DegenerateDataset { human_strict: 5, induced_strict: 0 })
        ));
        let all_ties = scalar_dataset(&[0.0, 1.0], &[(0, 1, Label::Tie)]);
        assert!(matches!(tac(&all_ties, &unit(), 0.0), Err(Error::DegenerateDataset { .. })));
    }

    #[test]
    fn tie_band_widens_ties() {
        let data = scalar_dataset(&[0.0, 0.05, 1.0], &[(0, 1, Label::RightPreferred), (0, 2, Label::RightPreferred)]);
        let r = tac(&data, &unit(), 0.1).unwrap();
        assert_eq!(r.tied_only_induced, 1);
        assert_eq!(r.concordant, 1);
        assert_abs_diff_eq!(r.tac, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn soft_tac_examples() {
        let ties = scalar_dataset(&[1.0, 1.0], &[(0, 1, Label::LeftPreferred)]);
        assert_eq!(soft_tac(&ties, &unit(), 1.0).unwrap(), 0.0);

        let single = scalar_dataset(&[2.0, 0.0], &[(0, 1, Label::LeftPreferred)]);
        // tanh(2) = (e^4 - 1) / (e^4 + 1)
        let e4 = 4f64.exp();
        assert_abs_diff_eq!(soft_tac(&single, &unit(), 1.0).unwrap(), (e4 - 1.0) / (e4 + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(soft_tac(&single, &unit(), 1.0).unwrap(), 0.9640, epsilon = 1e-4);

        assert!(soft_tac(&single, &unit(), 0.0).is_err());
        assert!(soft_tac(&single, &unit(), -1.0).is_err());
        let wrong = LinearRewardModel::undiscounted(vec![1.0, 2.0]).unwrap();
        assert!(matches!(soft_tac(&single, &wrong, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn soft_tac_matches_tac_when_sharp() {
        let data = toy_fixture(true);
        let s = soft_tac(&data, &unit(), 1000.0).unwrap();
        let t = tac(&data, &unit(), 0.0).unwrap().tac;
        assert_abs_diff_eq!(s, t, epsilon = 1e-6);
    }

    #[test]
    fn accuracy_examples() {
        assert_abs_diff_eq!(accuracy(&toy_fixture(true), &unit(), 0.0).unwrap(), 0.8, epsilon = 1e-15);
        assert_eq!(accuracy(&toy_fixture(false), &unit(), 0.0).unwrap(), 1.0);
        let neg = LinearRewardModel::undiscounted(vec![-1.0]).unwrap();
        assert_eq!(accuracy(&toy_fixture(false), &neg, 0.0).unwrap(), 0.0);
        let tie = scalar_dataset(&[1.0, 1.0], &[(0, 1, Label::Tie)]);
        assert_eq!(accuracy(&tie, &unit(), 0.0).unwrap(), 1.0);
        let empty = scalar_dataset(&[1.0, 1.0], &[]);
        assert_eq!(accuracy(&empty, &unit(), 0.0), Err(Error::EmptyDataset));
    }

    #[test]
    fn report_counts_are_consistent() {
        let data = scalar_dataset(
            &[0.0, 1.0, 1.0, 2.0],
            &[
                (0, 1, Label::RightPreferred),
                (1, 2, Label::LeftPreferred),
                (1, 2, Label::LeftPreferred),
                (2, 3, Label::Tie),
                (0, 3, Label::LeftPreferred),
            ],
        );
        let r = tac(&data, &unit(), 0.0).unwrap();
        assert_eq!(r.counts().total(), data.len());
        assert_eq!(r.per_pair.len(), data.len());
        assert_eq!(r.tac, r.counts().tac().unwrap());
    }

    fn random_dataset() -> impl Strategy<Value = (Vec<i32>, Vec<(usize, usize, i64)>, f64)> {
        (2usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(-3i32..4, n),
                prop::collection::vec((0..n, 0..n, -1i64..=1), 1..20),
                prop_oneof![Just(1.0), Just(3.0), Just(0.25)],
            )
        })
    }

    fn build(values: &[i32], raw: &[(usize, usize, i64)]) -> Option<PreferenceDataset> {
        let vals: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let pairs: Vec<_> = raw
            .iter()
            .filter(|(a, b, _)| a != b)
            .map(|&(a, b, y)| (a, b, Label::from_value(y).unwrap()))
            .collect();
        let ts = vals
            .iter()
            .enumerate()
            .map(|(i, v)| Trajectory::new(format!("t{i}"), vec![vec![*v]]).unwrap())
            .collect();
        let recs = pairs
            .iter()
            .map(|&(a, b, l)| PreferenceRecord::new(format!("t{a}"), format!("t{b}"), l))
            .collect();
        PreferenceDataset::new(ts, recs).ok().filter(|d| !d.is_empty())
    }

    proptest! {
        #[test]
        fn tac_and_soft_tac_are_bounded((values, raw, w) in random_dataset(), alpha in 0.01..100.0f64) {
            if let Some(data) = build(&values, &raw) {
                let m = LinearRewardModel::undiscounted(vec![w]).unwrap();
                if let Ok(r) = tac(&data, &m, 0.0) {
                    prop_assert!((-1.0..=1.0).contains(&r.tac));
                }
                let s = soft_tac(&data, &m, alpha).unwrap();
                prop_assert!((-1.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn positive_scaling_preserves_tac((values, raw, w) in random_dataset(), c in 0.001..1000.0f64) {
            if let Some(data) = build(&values, &raw) {
                let m = LinearRewardModel::undiscounted(vec![w]).unwrap();
                let scaled = LinearRewardModel::undiscounted(vec![w * c]).unwrap();
                let a = induce_preferences(&m, &data, 0.0).unwrap();
                let b = induce_preferences(&scaled, &data, 0.0).unwrap();
                prop_assert!(a.iter().zip(&b).all(|(x, y)| x.verdict == y.verdict));
                prop_assert_eq!(tac(&data, &m, 0.0).ok().map(|r| r.tac), tac(&data, &scaled, 0.0).ok().map(|r| r.tac));
            }
        }

        #[test]
        fn orientation_swap_is_invisible((values, raw, w) in random_dataset(), alpha in 0.1..10.0f64) {
            if let Some(data) = build(&values, &raw) {
                let swapped = data.with_records(data.records().iter().map(PreferenceRecord::reversed).collect()).unwrap();
                let m = LinearRewardModel::undiscounted(vec![w]).unwrap();
                prop_assert_eq!(tac(&data, &m, 0.0).ok().map(|r| r.tac), tac(&swapped, &m, 0.0).ok().map(|r| r.tac));
                let s1 = soft_tac(&data, &m, alpha).unwrap();
                let s2 = soft_tac(&swapped, &m, alpha).unwrap();
                prop_assert!((s1 - s2).abs() <= 1e-12);
            }
        }
    }
}
