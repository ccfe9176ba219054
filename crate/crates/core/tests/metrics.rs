use clickbait_core::eval::{auc, binary_metrics, mse, roc_curve, trapezoid_area, MseTarget, Scored};
use proptest::prelude::*;

/// Both classes present; scores on a coarse grid half the time so ties occur.
fn scored_sets() -> impl Strategy<Value = Vec<Scored>> {
    (2usize..60, any::<bool>())
        .prop_flat_map(|(n, coarse)| {
            let score = if coarse {
                (0u32..=10).prop_map(|k| k as f64 / 10.0).boxed()
            } else {
                (0.0f64..=1.0).boxed()
            };
            proptest::collection::vec((score, 0u8..=1), n)
        })
        .prop_map(|mut rows| {
            rows[0].1 = 0;
            rows[1].1 = 1;
            rows.into_iter().map(|(p, y)| Scored::new(p, y)).collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rank_auc_equals_trapezoid(s in scored_sets()) {
        let a = auc(&s).unwrap();
        let roc = roc_curve(&s).unwrap();
        prop_assert!((a - trapezoid_area(&roc)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        for w in roc.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            prop_assert!(w[1].threshold < w[0].threshold);
        }
        let last = roc.last().unwrap();
        prop_assert_eq!((roc[0].fpr, roc[0].tpr, last.fpr, last.tpr), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn auc_ignores_monotone_maps(s in scored_sets(), k in 0.2f64..5.0) {
        let mapped: Vec<Scored> = s
            .iter()
            .map(|r| Scored::new(r.probability.powf(k), r.label))
            .collect();
        prop_assert!((auc(&s).unwrap() - auc(&mapped).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn label_flip_complements_auc(s in scored_sets()) {
        let flipped: Vec<Scored> = s.iter().map(|r| Scored::new(r.probability, 1 - r.label)).collect();
        prop_assert!((auc(&s).unwrap() + auc(&flipped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_scores_tie_accuracy_to_mse(rows in proptest::collection::vec((0u8..=1, 0u8..=1), 1..80)) {
        let s: Vec<Scored> = rows.iter().map(|&(p, y)| Scored::new(p as f64, y)).collect();
        let r = binary_metrics(&s, 0.5).unwrap();
        prop_assert!((r.accuracy - (1.0 - mse(&s, MseTarget::HardLabel).unwrap())).abs() < 1e-12);
        prop_assert_eq!(r.confusion.total(), s.len());
        for v in [r.precision_pos, r.recall_pos, r.f1_pos, r.precision_weighted, r.recall_weighted, r.f1_weighted] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn hand_example_is_exact() {
    let s: Vec<Scored> = [(0.1, 0), (0.4, 0), (0.35, 1), (0.8, 1)]
        .iter()
        .map(|&(p, y)| Scored::new(p, y))
        .collect();
    assert_eq!(auc(&s).unwrap(), 0.75);
    assert_eq!(trapezoid_area(&roc_curve(&s).unwrap()), 0.75);
}
