mod support;

use dualctx::eval::{average_ranks, friedman_nemenyi, paired_t_test};
use proptest::prelude::*;
use support::t_reference::{vectors, T_TESTS};
use support::table;

#[test]
fn t_test_matches_frozen_reference() {
    for (case, &(n, t, p)) in T_TESTS.iter().enumerate() {
        let (a, b) = vectors(case as u64);
        assert_eq!(a.len(), n, "case {case}");
        let got = paired_t_test(&a, &b).unwrap();
        assert!((got.statistic - t).abs() <= 1e-9 * t.abs().max(1.0), "case {case}");
        assert!((got.p_value - p).abs() <= 1e-9, "case {case}: {} vs {p}", got.p_value);
    }
}

#[test]
fn t_test_small_reference() {
    let got = paired_t_test(&[0.5, 0.6, 0.55, 0.62], &[0.48, 0.59, 0.5, 0.6]).unwrap();
    assert!((got.statistic - 2.886751345948129).abs() < 1e-12);
    assert!((got.p_value - 0.06318007496544602).abs() < 1e-12);
}

/// Textbook paired t statistic.
fn t_statistic(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean / (var / n).sqrt()
}

proptest! {
    #[test]
    fn t_test_statistic_and_symmetry(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..60)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let got = paired_t_test(&a, &b).unwrap();
        prop_assume!(!got.degenerate);
        let t = t_statistic(&a, &b);
        prop_assert!((got.statistic - t).abs() <= 1e-9 * t.abs().max(1.0));
        prop_assert!((0.0..=1.0).contains(&got.p_value));
        let swapped = paired_t_test(&b, &a).unwrap();
        prop_assert!((swapped.p_value - got.p_value).abs() <= 1e-15);
    }
}

#[test]
fn standard_ranks_of_the_reported_table() {
    // Ordinary per-dataset ranks with ties averaged.
    let ranks = average_ranks(&table::rows()).unwrap();
    let expected = [1.00, 3.00, 4.71, 4.43, 2.86, 6.29, 6.86, 7.43, 8.43];
    for (r, e) in ranks.iter().zip(expected) {
        assert!((r - e).abs() < 0.005, "{ranks:?}");
    }
    assert!((ranks.iter().sum::<f64>() - 7.0 * 45.0 / 7.0).abs() < 1e-9);
}

#[test]
fn reported_rank_row_needs_nc_left_out() {
    let reported_sum: f64 = table::REPORTED_RANKS.iter().sum();
    // A genuine average-rank row over nine algorithms always sums to 45.
    assert!((reported_sum - 45.0).abs() > 1.0);
    let ranks = table::ranks_without_nc_for_stream_learners();
    for (r, e) in ranks.iter().zip(table::REPORTED_RANKS) {
        assert!((r - e).abs() < 0.005, "{ranks:?}");
    }
}

#[test]
fn friedman_on_the_reported_table_ranks_ltm_first() {
    let f = friedman_nemenyi(&table::rows(), 0.05).unwrap();
    assert_eq!(f.average_ranks[0], 1.0);
    assert!(f.p_value < 1e-6);
    assert!((f.critical_difference - 3.1017303413033805 * (90.0f64 / 42.0).sqrt()).abs() < 1e-9);
}
