//! End-to-end checks of the `pushpull` binary: exit codes, file emission,
//! override handling, and byte-level idempotence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pushpull"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["rate", "--config", "nope.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("config not found"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"graph":{"n":4,"p":0.0,"seed":1,"bogus":3},"model":{"d":2,"gamma":1.0,"w_low":1.0,"w_high":2.0,"noise_sd":1.0,"xtilde":{"rule":"constant","value":1.0}},"schedule":{"a":0.05,"b":1.0,"alpha":0.6},"experiment":{"iterations":10,"replications":1,"algorithms":["sab"],"base_seed":1}}"#,
    )
    .unwrap();
    let out = run_in(dir.path(), &["rate", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_override_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["rate", "--out", "o", "--override", "schedule.alfa=0.6"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kind_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "rate",
            "--out",
            "o",
            "--override",
            "experiment.kind=coverage",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_replications_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "coverage",
            "--out",
            "o",
            "--override",
            "experiment.replications=0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_smoke_run_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rate",
        "--quiet",
        "--seed",
        "9",
        "--override",
        "experiment.replications=2",
        "--override",
        "experiment.iterations=50",
        "--override",
        "experiment.checkpoints=[0,25,50]",
        "--override",
        "experiment.gt_mc_samples=500",
    ];
    let out = run_in(dir.path(), &[&args[..], &["--out", "a"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run_in(dir.path(), &[&args[..], &["--out", "b"]].concat());
    assert_eq!(out.status.code(), Some(0));
    for name in [
        "rate_curves.csv",
        "rate_summary.json",
        "resolved_config.json",
    ] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // The echoed config carries the effective seed.
    let echoed = fs::read_to_string(dir.path().join("a/resolved_config.json")).unwrap();
    assert!(echoed.contains("\"base_seed\": 9"));
}

#[test]
fn normality_smoke_warns_on_few_replications() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "normality",
            "--out",
            "n",
            "--override",
            "experiment.replications=3",
            "--override",
            "experiment.iterations=40",
            "--override",
            "experiment.checkpoints=[40]",
            "--override",
            "experiment.gt_mc_samples=500",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = fs::read_to_string(dir.path().join("n/normality_report.json")).unwrap();
    assert!(report.contains("\"ks_skipped\": true"));
    assert!(dir.path().join("n/normality_samples.csv").exists());
}

#[test]
fn coverage_at_half_beta_is_roughly_calibrated() {
    // With beta = 0.5 the region is a median ball: coverage near 50% once
    // the averaged error is close to its limit law. Loose band, small run.
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "coverage",
            "--quiet",
            "--out",
            "c",
            "--override",
            "experiment.beta=0.5",
            "--override",
            "experiment.replications=60",
            "--override",
            "experiment.iterations=4000",
            "--override",
            "experiment.checkpoints=[4000]",
            "--override",
            "experiment.gt_mc_samples=2000",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("c/coverage_table.csv")).unwrap();
    let pi_line = table.lines().nth(1).unwrap();
    let rate: f64 = pi_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        (25.0..=75.0).contains(&rate),
        "PI rate {rate}% not near 50%"
    );
}

#[test]
fn validate_warns_but_passes_on_large_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["validate", "--out", "v", "--override", "schedule.a=5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("WARNING"), "{text}");
    assert!(dir.path().join("v/graph.txt").exists());
    assert!(dir.path().join("v/matrix_pull.csv").exists());
}

#[test]
fn ground_truth_single_agent() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "ground-truth",
            "--out",
            "g",
            "--override",
            "graph.n=1",
            "--override",
            "model.xtilde.rule=constant",
            "--override",
            "model.xtilde.value=0",
            "--override",
            "experiment.gt_mc_samples=200",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("warning"),
        "low sample count must warn: {text}"
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g/ground_truth.json")).unwrap())
            .unwrap();
    for v in json["x_star"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 1e-12);
    }
    assert_eq!(json["mc_samples"].as_u64(), Some(200));
}

#[test]
fn usage_error_exits_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
