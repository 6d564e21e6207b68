use proptest::prelude::*;
use tac_core::losses::{per_sample_gradient, soft_tac_label_sum};
use tac_core::{ComparisonSet, Label, LossKind};

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::LeftPreferred), Just(Label::RightPreferred), Just(Label::Tie)]
}

fn pairs_strategy() -> impl Strategy<Value = ComparisonSet> {
    (1usize..5).prop_flat_map(|dim| {
        prop::collection::vec((label(), prop::collection::vec(-2.0..2.0f64, dim)), 1..12).prop_map(|rows| {
            let (labels, diffs) = rows.into_iter().unzip();
            ComparisonSet::from_parts(labels, diffs).unwrap()
        })
    })
}

fn numeric_gradient(kind: LossKind, w: &[f64], pairs: &ComparisonSet, batch: &[usize], alpha: f64) -> Vec<f64> {
    let f = |w: &[f64]| kind.evaluate(w, pairs, batch, alpha).unwrap().value;
    (0..w.len())
        .map(|k| {
            let h = 1e-6 * w[k].abs().max(1.0);
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(150) })]

    #[test]
    fn analytic_gradient_matches_central_difference(
        pairs in pairs_strategy(),
        seed_w in prop::collection::vec(-1.5..1.5f64, 4),
        alpha in 0.1..3.0f64,
        ce in any::<bool>(),
    ) {
        let kind = if ce { LossKind::CrossEntropy } else { LossKind::SoftTac };
        let w: Vec<f64> = seed_w.iter().cycle().take(pairs.dim()).copied().collect();
        let batch: Vec<usize> = (0..pairs.len()).collect();
        let analytic = kind.evaluate(&w, &pairs, &batch, alpha).unwrap().gradient;
        let numeric = numeric_gradient(kind, &w, &pairs, &batch, alpha);
        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(n.abs()).max(1e-3);
            prop_assert!((a - n).abs() / scale < 1e-5, "{} vs {}", a, n);
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients(pairs in pairs_strategy(), alpha in 0.1..3.0f64) {
        let w = vec![0.3; pairs.dim()];
        let batch: Vec<usize> = (0..pairs.len()).collect();
        for kind in [LossKind::SoftTac, LossKind::CrossEntropy] {
            let total = kind.evaluate(&w, &pairs, &batch, alpha).unwrap().gradient;
            let mut sum = vec![0.0; pairs.dim()];
            for i in 0..pairs.len() {
                for (s, g) in sum.iter_mut().zip(per_sample_gradient(kind, &w, &pairs, i, alpha).unwrap()) {
                    *s += g / pairs.len() as f64;
                }
            }
            for (a, b) in total.iter().zip(&sum) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn soft_tac_losses_over_all_labels_sum_to_three(z in -50.0..50.0f64, alpha in 0.01..100.0f64) {
        prop_assert!((soft_tac_label_sum(z, alpha) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn losses_are_finite_for_extreme_margins(z in -1e6..1e6f64, y in label()) {
        for kind in [LossKind::SoftTac, LossKind::CrossEntropy] {
            prop_assert!(kind.sample_loss(z, y).is_finite());
            prop_assert!(kind.sample_slope(z, y).is_finite());
        }
    }
}

#[test]
fn mislabeled_cross_entropy_slope_at_zero() {
    let pairs = ComparisonSet::from_parts(vec![Label::LeftPreferred], vec![vec![-2.0]]).unwrap();
    let g = per_sample_gradient(LossKind::CrossEntropy, &[0.0], &pairs, 0, 1.0).unwrap();
    assert_eq!(g, vec![1.0]);
}
