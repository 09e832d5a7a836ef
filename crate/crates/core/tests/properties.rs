//! Property tests for invariants that hold on arbitrary inputs, not just
//! the hand-picked unit cases.

use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use rocket_prune::groups::{dynamic_threshold, group_norms, group_soft_threshold, GroupLayout};
use rocket_prune::kernel_bank::{generate_rocket, prune_bank, ModelKind};
use rocket_prune::preprocess::{encode_labels, standardize_apply, standardize_fit};
use rocket_prune::ridge::{argmax_rows, predict_scores};
use rocket_prune::transform::ppv;

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-50.0f64..50.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardized_columns_are_centered_unit_norm(x in matrix_strategy(7, 4)) {
        let (xn, s) = standardize_fit(&x.view()).unwrap();
        for j in 0..4 {
            let col = xn.column(j);
            let mean = col.sum() / 7.0;
            prop_assert!(mean.abs() <= 1e-10);
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            // constant columns map to zero, everything else to unit norm
            prop_assert!(norm <= 1e-8 || (norm - 1.0).abs() <= 1e-8);
        }
        let again = standardize_apply(&x.view(), &s).unwrap();
        prop_assert_eq!(xn, again);
    }

    #[test]
    fn soft_threshold_shrinks_group_norms_exactly(
        w in matrix_strategy(8, 3),
        threshold in 0.0f64..20.0,
    ) {
        let layout = GroupLayout::new(4, 2);
        let theta = group_soft_threshold(&w.view(), threshold, &layout).unwrap();
        let before = group_norms(&w.view(), &layout).unwrap();
        let after = group_norms(&theta.view(), &layout).unwrap();
        for g in 0..4 {
            let expected = (before[g] - threshold).max(0.0);
            prop_assert!((after[g] - expected).abs() <= 1e-9 * before[g].max(1.0));
        }
    }

    #[test]
    fn at_most_m_groups_survive_the_dynamic_threshold(
        w in matrix_strategy(12, 2),
        m in 1usize..12,
    ) {
        let layout = GroupLayout::new(12, 1);
        let norms = group_norms(&w.view(), &layout).unwrap();
        let (threshold, order) = dynamic_threshold(&norms, m).unwrap();
        let theta = group_soft_threshold(&w.view(), threshold, &layout).unwrap();
        let survivors = group_norms(&theta.view(), &layout)
            .unwrap()
            .iter()
            .filter(|&&v| v > 0.0)
            .count();
        prop_assert!(survivors <= m);
        // the order is a permutation sorted by descending norm
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..12).collect::<Vec<_>>());
        for pair in order.windows(2) {
            prop_assert!(norms[pair[0]] >= norms[pair[1]]);
        }
    }

    #[test]
    fn pruning_composes_by_intersection(
        keep_a in proptest::collection::btree_set(0usize..12, 1..12),
        keep_b in proptest::collection::btree_set(0usize..12, 1..12),
    ) {
        let bank = generate_rocket(12, 64, 5, ModelKind::RocketPpvMax).unwrap();
        let b_in_a: BTreeSet<usize> = keep_a.intersection(&keep_b).copied().collect();
        prop_assume!(!b_in_a.is_empty());
        let two_step = prune_bank(&prune_bank(&bank, &keep_a).unwrap(), &b_in_a).unwrap();
        let one_step = prune_bank(&bank, &b_in_a).unwrap();
        let a: Vec<usize> = two_step.kernels.iter().map(|k| k.group_id).collect();
        let b: Vec<usize> = one_step.kernels.iter().map(|k| k.group_id).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ppv_stays_in_the_unit_interval(v in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
        let p = ppv(&v).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn argmax_is_invariant_to_positive_scaling(
        x in matrix_strategy(6, 3),
        w in matrix_strategy(3, 4),
        scale in 0.01f64..100.0,
    ) {
        let zeros = vec![0.0; 4];
        let a = argmax_rows(&predict_scores(&x.view(), &w.view(), &zeros).unwrap().view());
        let scaled = w.mapv(|v| v * scale);
        let b = argmax_rows(&predict_scores(&x.view(), &scaled.view(), &zeros).unwrap().view());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn encoded_labels_are_centered_sign_matrices(
        labels in proptest::collection::vec(0usize..4, 4..30),
    ) {
        let enc = encode_labels(&labels, 4).unwrap();
        let n = labels.len() as f64;
        for c in 0..4 {
            prop_assert!(enc.y.column(c).sum().abs() <= 1e-8 * n);
        }
        // adding back the stored means recovers the raw ±1 coding
        for (i, &lab) in labels.iter().enumerate() {
            for c in 0..4 {
                let raw = enc.y[(i, c)] + enc.column_means[c];
                let expected = if lab == c { 1.0 } else { -1.0 };
                prop_assert!((raw - expected).abs() <= 1e-12);
            }
        }
    }
}
