use proptest::collection::vec;
use proptest::prelude::*;
use seatrade::eval::{invert_permutation, metrics, pearson, permute_columns, r2_score, row_permutation};
use seatrade::extrap::{anchor, pct_change, ChangeWindow, PortSeries};
use seatrade::gbt::{self, fit_traced, HyperParams, Matrix};
use seatrade::panel::{read_panel_csv, write_panel_csv, HarborSize, Panel, PanelRow};
use seatrade::YearMonth;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

fn small_params(seed: u64) -> HyperParams {
    HyperParams {
        n_rounds: 20,
        max_depth: 3,
        learning_rate: 0.3,
        min_child_weight: 1.0,
        n_bins: 32,
        seed,
        ..HyperParams::default()
    }
}

/// Rows of (two integer-valued features, target).
fn dataset() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    vec((0u8..50, 0u8..50, -10.0f64..10.0), 10..80).prop_map(|rows| {
        let x = rows.iter().flat_map(|(a, b, _)| [*a as f64, *b as f64]).collect();
        let y = rows.iter().map(|r| r.2).collect();
        (x, y)
    })
}

fn months_from(start: &str, n: usize) -> Vec<YearMonth> {
    let s: YearMonth = start.parse().unwrap();
    (0..n).map(|i| s.offset(i as i64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_sample_boosting_never_raises_training_loss((x, y) in dataset()) {
        let params = HyperParams { subsample_rows: 1.0, subsample_cols: 1.0, ..small_params(0) };
        let (_, trace) = fit_traced(&Matrix::new(&x, 2).unwrap(), &y, &names(2), &params).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", trace);
        }
    }

    #[test]
    fn increasing_feature_transform_keeps_predictions((x, y) in dataset(), seed in any::<u64>()) {
        // 3v - 7 is exact on small integers, so ranks and ties are preserved.
        let xt: Vec<f64> = x.iter().map(|v| 3.0 * v - 7.0).collect();
        let p = small_params(seed);
        let a = gbt::fit(&Matrix::new(&x, 2).unwrap(), &y, &names(2), &p).unwrap();
        let b = gbt::fit(&Matrix::new(&xt, 2).unwrap(), &y, &names(2), &p).unwrap();
        let pa = a.predict(&Matrix::new(&x, 2).unwrap()).unwrap();
        let pb = b.predict(&Matrix::new(&xt, 2).unwrap()).unwrap();
        prop_assert_eq!(pa, pb);
    }

    #[test]
    fn fitting_is_deterministic_per_seed((x, y) in dataset(), seed in any::<u64>()) {
        let p = small_params(seed);
        let m = Matrix::new(&x, 2).unwrap();
        let a = gbt::fit(&m, &y, &names(2), &p).unwrap().to_json().unwrap();
        let b = gbt::fit(&m, &y, &names(2), &p).unwrap().to_json().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn importances_sum_to_100_or_are_all_zero((x, y) in dataset()) {
        let model = gbt::fit(&Matrix::new(&x, 2).unwrap(), &y, &names(2), &small_params(1)).unwrap();
        let total: f64 = model.gain_importance().iter().map(|(_, g)| g).sum();
        prop_assert!(total == 0.0 || (total - 100.0).abs() < 1e-6);
    }

    #[test]
    fn metric_invariants(pairs in vec((-5.0f64..5.0, -5.0f64..5.0), 3..60), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let (act, pred): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = metrics(&act, &pred).unwrap();
        prop_assert!(m.mae >= 0.0 && m.rmse >= m.mae - 1e-12);
        if let Some(r2) = r2_score(&act, &act) {
            prop_assert_eq!(r2, 1.0);
        }
        if let Some(r2) = m.r2 {
            prop_assert!(r2 <= 1.0);
        }
        let affine: Vec<f64> = pred.iter().map(|p| a * p + b).collect();
        if let (Some(c1), Some(c2)) = (pearson(&act, &pred), pearson(&act, &affine)) {
            prop_assert!((c1 - c2).abs() < 1e-9);
            prop_assert!((c1 - pearson(&pred, &act).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn change_estimate_ignores_level_and_tracks_post_shift(
        values in vec(-20.0f64..20.0, 6..40),
        c in -50.0f64..50.0,
        split in 0.2f64..0.8,
    ) {
        let n = values.len();
        let months = months_from("2019-01", n);
        let cut = ((n as f64 * split) as usize).clamp(1, n - 2);
        let window = ChangeWindow::new(months[0], months[cut - 1], months[cut + 1], months[n - 1]).unwrap();
        let s = PortSeries::new("p", months.clone(), values.clone()).unwrap();
        let base = pct_change(&s, &window).unwrap();
        prop_assert!((pct_change(&s.shifted(c), &window).unwrap().delta_log - base.delta_log).abs() < 1e-12);

        let post_shifted: Vec<f64> = values.iter().enumerate().map(|(i, v)| if i > cut { v + c } else { *v }).collect();
        let s2 = PortSeries::new("p", months, post_shifted).unwrap();
        prop_assert!((pct_change(&s2, &window).unwrap().delta_log - (base.delta_log + c)).abs() < 1e-9);
    }

    #[test]
    fn anchoring_pins_first_month_and_is_idempotent(values in vec(-20.0f64..20.0, 1..30), obs in -20.0f64..20.0) {
        let s = PortSeries::new("p", months_from("2020-01", values.len()), values).unwrap();
        let a = anchor(&s, obs).unwrap();
        prop_assert_eq!(a.anchored_pred[0], obs);
        let again = anchor(&a.anchored(), obs).unwrap();
        prop_assert_eq!(again.offset, 0.0);
        prop_assert_eq!(&again.anchored_pred, &a.anchored_pred);
    }

    #[test]
    fn unshuffling_restores_the_panel(n in 1usize..60, seed in any::<u64>()) {
        let p = toy_panel(n);
        let perm = row_permutation(n, seed);
        let shuffled = permute_columns(&p, &p.sat_columns, &perm).unwrap();
        let back = permute_columns(&shuffled, &p.sat_columns, &invert_permutation(&perm)).unwrap();
        prop_assert_eq!(bits(&back), bits(&p));
        // Keys and targets never move; only the satellite column does.
        for (a, b) in shuffled.rows.iter().zip(&p.rows) {
            prop_assert_eq!(&a.port_id, &b.port_id);
            prop_assert_eq!(a.y_value_log, b.y_value_log);
            prop_assert_eq!(a.features[1], b.features[1]);
        }
    }

    #[test]
    fn panel_csv_write_is_idempotent(n in 1usize..40) {
        let p = toy_panel(n);
        let mut first = Vec::new();
        write_panel_csv(&mut first, &p).unwrap();
        let back = read_panel_csv(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_panel_csv(&mut second, &back).unwrap();
        prop_assert_eq!(first, second);
    }
}

/// Feature bit patterns, so that NaN cells compare equal.
fn bits(p: &Panel) -> Vec<Vec<u64>> {
    p.rows.iter().map(|r| r.features.iter().map(|v| v.to_bits()).collect()).collect()
}

fn toy_panel(n: usize) -> Panel {
    let start: YearMonth = "2018-01".parse().unwrap();
    let rows = (0..n)
        .map(|i| PanelRow {
            port_id: format!("P{}", i % 4),
            year_month: start.offset((i / 4) as i64),
            region: Some(if i % 2 == 0 { "east" } else { "west" }.into()),
            harbor_size: [None, Some(HarborSize::Small), Some(HarborSize::Large)][i % 3],
            y_value_log: i as f64 * 0.37,
            y_weight_log: i as f64 * 0.11,
            features: vec![if i % 5 == 0 { f64::NAN } else { i as f64 * 1.5 }, (i % 3) as f64],
        })
        .collect();
    Panel {
        feature_names: vec!["sar_diff_median".into(), "harbor_type".into()],
        sat_columns: vec!["sar_diff_median".into()],
        rows,
    }
}
