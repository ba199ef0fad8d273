//! Presets on reduced configurations: report structure, aggregates and the
//! behaviours each study is meant to show.

use randsig::experiment::{self, ExperimentConfig, Preset, Report};
use randsig::Error;

fn run(preset: Preset, overrides: &str) -> Report {
    let cfg = ExperimentConfig::from_toml_str(overrides, Some(preset), false).unwrap();
    experiment::run(&cfg).unwrap()
}

#[test]
fn aggregates_recompute_from_rows() {
    let report = run(Preset::Custom, "[experiment]\nseeds = [0, 1]\nn_train = 20\nn_test = 15\n");
    for agg in report.aggregates() {
        let v = report.values(&agg.group, &agg.metric);
        assert_eq!(v.len(), agg.count);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!((agg.mean - mean).abs() <= 1e-12 * mean.abs().max(1e-300));
        assert!((agg.std - std).abs() <= 1e-12 * std.max(mean.abs()).max(1e-300));
    }
    let csv = report.metrics_csv();
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
    assert!(report.table("sample_trajectories").is_some());
}

#[test]
fn single_seed_band_has_zero_width_and_more_seeds_keep_it_stable() {
    let base = "[experiment]\nn_train = 50\nn_test = 20\n";
    let one = run(Preset::Robustness, &format!("{base}seeds = [0]\n"));
    assert!(one.values("band", "mean_std").iter().all(|&s| s == 0.0));

    let ten = run(Preset::Robustness, &format!("{base}seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]\n"));
    let twenty = run(
        Preset::Robustness,
        &format!("{base}seeds = [{}]\n", (0..20).map(|s| s.to_string()).collect::<Vec<_>>().join(", ")),
    );
    let a = ten.mean("band", "mean_std").unwrap();
    let b = twenty.mean("band", "mean_std").unwrap();
    assert!(a > 0.0 && (a / b).max(b / a) <= 1.5, "{a} vs {b}");
    let band = ten.table("band_0").unwrap();
    assert_eq!(band.header, ["t", "component", "truth", "mean", "std", "lower", "upper"]);
    for row in &band.rows {
        assert!((row[5] - (row[3] - 3.0 * row[4])).abs() < 1e-12);
    }
}

#[test]
fn compression_reaches_interpolation_at_flat_dimension() {
    let report = run(Preset::Compression, "[compression]\nk_values = [10, 50, 100, 780]\n");
    let errs = report.values("compression", "rel_frobenius");
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    assert!(errs[3] <= 1e-8, "{errs:?}");
    assert_eq!(report.values("compression_summary", "signature_integrals"), [780.0]);
}

#[test]
fn compression_memory_guard_trips_before_work() {
    for full in [false, true] {
        let text = "[compression]\nmemory_budget_bytes = 100000\n";
        let cfg = ExperimentConfig::from_toml_str(text, Some(Preset::Compression), full).unwrap();
        match experiment::run(&cfg) {
            Err(Error::MemoryBudget { required, budget, .. }) => assert!(required > budget),
            other => panic!("expected a memory-budget error, got {other:?}"),
        }
    }
}

#[test]
fn full_scale_flat_dimension_and_operation_count() {
    assert_eq!(randsig::tsig::flat_dim(10, 6), Some(1_111_110));
    assert_eq!(190 * 190 * 10, 361_000);
    // At the reported crossing the randomized route needs about 3x fewer operations.
    assert!((1_111_110.0 / 361_000.0 - 3.08f64).abs() < 0.01);
}

#[test]
fn truncated_features_outgrow_randomized_ones() {
    let text = "[experiment]\nn_test = 10\n[comparison]\nm_values = [3, 6]\nn_train_values = [2]\n";
    let report = run(Preset::RsigVsTsig, text);
    for m in [3usize, 6] {
        let rs = report.values(&format!("rsig_m{m}_n2"), "parameter_count")[0];
        let ts = report.values(&format!("tsig_m{m}_n2"), "parameter_count")[0];
        let d = (m + 1) as f64;
        assert_eq!(rs, d * m as f64);
        assert_eq!(ts, (d.powi(4) - 1.0) / (d - 1.0) * m as f64);
        assert!(ts > 10.0 * rs);
    }
    // Two trajectories give 202 rows: enough for 85 features at m = 3, not
    // for 400 at m = 6.
    assert_eq!(report.values("tsig_m3_n2", "underdetermined"), [0.0]);
    assert_eq!(report.values("tsig_m6_n2", "underdetermined"), [1.0]);
    assert_eq!(report.values("rsig_m6_n2", "underdetermined"), [0.0]);
}

#[test]
fn baseline_models_share_parameter_count() {
    let report = run(Preset::BaselineCompare, "[experiment]\nn_train = 40\nn_test = 20\n");
    assert_eq!(report.values("rs_summary", "parameter_count"), [50.0]);
    assert_eq!(report.values("esn_summary", "parameter_count"), [50.0]);
    assert_eq!(report.values("rs", "rel_l2").len(), 20);
    assert_eq!(report.values("esn", "rel_l2").len(), 20);
}

#[test]
fn enzyme_reports_both_regimes_and_zero_control() {
    let report = run(Preset::EnzymeOod, "[experiment]\nn_train = 300\nn_test = 40\n");
    let ind = report.mean("in_distribution", "rel_l2").unwrap();
    assert!(ind.is_finite() && ind < 0.2);
    let silent = report.values("summary", "silent_trajectories")[0] as usize;
    assert_eq!(report.values("out_of_distribution", "rel_l2").len() + silent, 40);
    // No injection from an empty reactor produces nothing.
    assert_eq!(report.values("zero_control", "max_abs_product")[1], 0.0);
    assert!(report.table("out_of_distribution_trajectories").is_some());
}

#[test]
fn irregular_grids_are_harder_than_regular_ones() {
    let text = "[experiment]\nn_train = 400\nn_test = 100\n[irregular]\ncells = [[11, 40], [51, 80]]\n";
    let report = run(Preset::IrregularGrid, text);
    let table = report.table("grid_table").unwrap();
    assert_eq!(table.rows.len(), 2);
    for row in &table.rows {
        assert!(row[3] > row[2], "irregular {} vs regular {}", row[3], row[2]);
    }
}
