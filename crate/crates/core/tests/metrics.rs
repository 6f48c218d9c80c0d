mod common;

use aes3d_core::evaluation::{
    calibrated_evaluation, kendall, logistic_fit_plcc, mae, rmse, spearman, trivial_predictor, MetricsReport, TrivialKind,
};
use common::metric_oracle::{count_ranks, pair_tau_b, plain_pearson};
use proptest::prelude::*;

fn tied_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0i32..8, 2..50).prop_map(|v| v.into_iter().map(f64::from).collect())
}

proptest! {
    #[test]
    fn srcc_is_pearson_of_ranks((x, y) in (2usize..50).prop_flat_map(|n| (
        prop::collection::vec(prop_oneof![(0i32..6).prop_map(f64::from), -1.0f64..1.0], n),
        prop::collection::vec(prop_oneof![(0i32..6).prop_map(f64::from), -1.0f64..1.0], n),
    ))) {
        let oracle = plain_pearson(&count_ranks(&x), &count_ranks(&y));
        prop_assert!((spearman(&x, &y) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn krcc_matches_pair_counting(x in tied_vec(), seed in any::<u64>()) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, _)| ((seed >> (i % 60)) % 5) as f64).collect();
        prop_assert!((kendall(&x, &y) - pair_tau_b(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn rank_metrics_ignore_monotone_maps(x in prop::collection::vec(-3.0f64..3.0, 3..40), seed in any::<u64>()) {
        let y: Vec<f64> = (0..x.len()).map(|i| ((seed.rotate_left(i as u32 * 7)) % 97) as f64).collect();
        let fx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        prop_assert!((spearman(&x, &y) - spearman(&fx, &y)).abs() < 1e-12);
        prop_assert!((kendall(&x, &y) - kendall(&fx, &y)).abs() < 1e-12);
    }

    #[test]
    fn rmse_bounds_mae(p in prop::collection::vec(-2.0f64..2.0, 1..60), shift in -1.0f64..1.0) {
        let t: Vec<f64> = p.iter().enumerate().map(|(i, v)| v * 0.5 + shift * (i as f64).sin()).collect();
        prop_assert!(rmse(&p, &t) >= mae(&p, &t));
    }

    #[test]
    fn logistic_plcc_ignores_positive_affine_maps(
        x in prop::collection::vec(0.0f64..1.0, 6..40),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let t: Vec<f64> = x.iter().map(|v| 0.3 + 0.4 * v * v).collect();
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let f1 = logistic_fit_plcc(&x, &t);
        let f2 = logistic_fit_plcc(&moved, &t);
        prop_assume!(!f1.degenerate);
        prop_assert!((f1.plcc - f2.plcc).abs() <= 1e-5, "{} vs {}", f1.plcc, f2.plcc);
    }

    #[test]
    fn exactly_affine_targets_give_unit_plcc(x in prop::collection::vec(-1.0f64..1.0, 5..50), a in 0.05f64..3.0, b in -1.0f64..1.0) {
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted[sorted.len() - 1] - sorted[0] > 1e-3);
        let t: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((logistic_fit_plcc(&x, &t).plcc - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn mean_predictor_rmse_is_spread_about_train_mean(
        train in prop::collection::vec(0.0f64..1.0, 1..40),
        test in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let m = trivial_predictor(&train, TrivialKind::Mean);
        let oracle = (test.iter().map(|t| (t - m).powi(2)).sum::<f64>() / test.len() as f64).sqrt();
        prop_assert!((rmse(&vec![m; test.len()], &test) - oracle).abs() <= 1e-9);
    }

    #[test]
    fn calibration_never_reads_test_targets(
        train in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30),
        test in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 5..30),
        shift in 0.01f64..0.5,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = train.into_iter().unzip();
        let (tp, tt): (Vec<f64>, Vec<f64>) = test.into_iter().unzip();
        let perturbed: Vec<f64> = tt.iter().map(|v| 1.0 - v * shift).collect();
        let (before, _) = calibrated_evaluation(&p, &t, &tp, &tt);
        let (after, _) = calibrated_evaluation(&p, &t, &tp, &perturbed);
        prop_assert_eq!(before.a.to_bits(), after.a.to_bits());
        prop_assert_eq!(before.b.to_bits(), after.b.to_bits());
    }
}

#[test]
fn report_on_perfect_predictions() {
    let t: Vec<f64> = (0..20).map(|i| 0.2 + 0.03 * i as f64).collect();
    let r = MetricsReport::compute(&t, &t);
    assert!((r.srcc - 1.0).abs() < 1e-15 && (r.krcc - 1.0).abs() < 1e-15);
    assert!((r.plcc - 1.0).abs() < 1e-6);
    assert_eq!(r.mae, 0.0);
}
