//! End-to-end runs of the `randsig` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn randsig(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randsig")).args(args).current_dir(dir).output().expect("spawn randsig")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &str = "[experiment]\nn_train = 20\nn_test = 10\n";

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

#[test]
fn simulate_features_train_predict_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config(dir);

    ok(&randsig(&["--config", &cfg, "--out", "sim", "simulate", "--count", "2"], dir));
    for name in ["control_0.csv", "trajectory_0.csv", "control_1.csv", "trajectory_1.csv"] {
        assert!(dir.join("sim").join(name).is_file(), "{name}");
    }
    let control = dir.join("sim/control_0.csv").display().to_string();
    let header = fs::read_to_string(&control).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,"), "{header}");

    ok(&randsig(&["--out", "rs", "features", &control, "--k", "7"], dir));
    let feats = fs::read_to_string(dir.join("rs/features.csv")).unwrap();
    assert_eq!(feats.lines().next().unwrap().split(',').count(), 8);
    assert_eq!(feats.lines().count(), 102);
    let saved = dir.join("rs/reservoir.bin").display().to_string();
    ok(&randsig(&["--out", "rs2", "features", &control, "--reservoir", &saved], dir));
    assert_eq!(fs::read_to_string(dir.join("rs2/features.csv")).unwrap(), feats);

    ok(&randsig(&["--out", "ts", "features", &control, "--kind", "tsig", "--order", "2"], dir));
    let ts = fs::read_to_string(dir.join("ts/features.csv")).unwrap();
    // Time plus one noise channel at order 2: 2 + 4 entries.
    assert_eq!(ts.lines().next().unwrap().split(',').count(), 7);

    ok(&randsig(&["--config", &cfg, "--out", "model", "train"], dir));
    let metrics = fs::read_to_string(dir.join("model/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("trajectory_id,rel_l2"));
    assert_eq!(metrics.lines().count(), 12);
    assert!(metrics.lines().last().unwrap().starts_with("mean,"));
    assert!(dir.join("model/config.toml").is_file());

    let model = dir.join("model/model.bin").display().to_string();
    ok(&randsig(&["--out", "pred", "predict", &control, "--model", &model], dir));
    let pred = fs::read_to_string(dir.join("pred/prediction.csv")).unwrap();
    assert_eq!(pred.lines().count(), 102);
}

#[test]
fn experiment_writes_report_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config(dir);
    for out in ["a", "b"] {
        let run = randsig(&["--config", &cfg, "--seed", "3", "--out", out, "experiment", "custom"], dir);
        ok(&run);
        assert!(String::from_utf8_lossy(&run.stdout).contains("rel_l2"));
    }
    for name in ["metrics.csv", "summary.csv", "summary.txt", "timings.csv", "config.toml"] {
        assert!(dir.join("a").join(name).is_file(), "{name}");
    }
    let a = fs::read(dir.join("a/metrics.csv")).unwrap();
    assert_eq!(a, fs::read(dir.join("b/metrics.csv")).unwrap());
}

#[test]
fn bad_inputs_exit_with_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.toml"), "[experiment]\nn_train = \"many\"\n").unwrap();
    let out = randsig(&["--config", "bad.toml", "experiment", "custom"], dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    fs::write(dir.join("unknown.toml"), "[experiment]\nbogus = 1\n").unwrap();
    assert_eq!(randsig(&["--config", "unknown.toml", "train"], dir).status.code(), Some(2));

    fs::write(dir.join("broken.csv"), "t,x1\n0.0,0.0\n0.5\n").unwrap();
    assert_eq!(randsig(&["features", "broken.csv"], dir).status.code(), Some(2));

    let missing = randsig(&["features", "does_not_exist.csv"], dir);
    assert_eq!(missing.status.code(), Some(1));

    fs::write(dir.join("junk.bin"), b"not a model").unwrap();
    fs::write(dir.join("x.csv"), "t,x1\n0.0,0.0\n1.0,0.5\n").unwrap();
    assert_eq!(randsig(&["predict", "x.csv", "--model", "junk.bin"], dir).status.code(), Some(2));

    assert_ne!(randsig(&["experiment", "no_such_preset"], dir).status.code(), Some(0));
}
