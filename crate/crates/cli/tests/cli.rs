use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fcpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcpd"))
        .args(args)
        .env("FCPD_CACHE_DIR", cache_dir())
        .output()
        .expect("run fcpd")
}

fn cache_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("fcpd-cache")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, scenario: &str, n: usize, seed: u64, curves: bool) -> PathBuf {
    let path = dir.join(format!("{scenario}-{n}-{seed}-{curves}.csv"));
    let n = n.to_string();
    let seed = seed.to_string();
    let mut args = vec!["gen", "--scenario", scenario, "--n", &n, "--seed", &seed];
    if curves {
        args.push("--curves");
    }
    args.extend(["--out", path.to_str().unwrap()]);
    let o = fcpd(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn detect(path: &Path, extra: &[&str]) -> (i32, Value) {
    let mut args = vec!["detect", path.to_str().unwrap()];
    args.extend(extra);
    let o = fcpd(&args);
    let report = serde_json::from_str(&stdout(&o)).unwrap_or(Value::Null);
    (o.status.code().unwrap(), report)
}

#[test]
fn null_samples_are_mostly_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let accepted = (1..=20)
        .filter(|seed| {
            let path = generate(dir.path(), "A", 200, *seed, false);
            detect(&path, &["--d", "1", "--alpha", "0.10"]).0 == 0
        })
        .count();
    assert!(accepted >= 17, "{accepted}/20");
}

#[test]
fn aligned_detection_of_high_order_change() {
    let dir = tempfile::tempdir().unwrap();
    let rejected = (1..=20)
        .filter(|seed| {
            let path = generate(dir.path(), "C", 200, *seed, false);
            let (code, report) = detect(&path, &["--aligned"]);
            code == 3 && report["reject"] == Value::Bool(true)
        })
        .count();
    assert!(rejected >= 19, "{rejected}/20");
}

#[test]
fn constant_curves_give_infinite_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    let row = vec!["1.5"; 101].join(",");
    std::fs::write(&path, format!("{}\n", vec![row; 30].join("\n"))).unwrap();
    let (code, report) = detect(&path, &["--curves", "--trace"]);
    assert_eq!(code, 3);
    assert_eq!(report["statistic"], Value::String("inf".into()));
    assert_eq!(report["trace"], Value::Array(vec![]));
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let good = vec!["0.1"; 3].join(",");
    let mut lines = vec![good.clone(); 12];
    lines[6] = "0.1,oops,0.3".into();
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = fcpd(&["detect", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 7"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let short = dir.path().join("short.csv");
    std::fs::write(&short, vec![good; 5].join("\n")).unwrap();
    assert_eq!(
        fcpd(&["detect", short.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(fcpd(&["detect"]).status.code(), Some(1));
    assert_eq!(fcpd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        fcpd(&["gen", "--scenario", "Z", "--n", "20"]).status.code(),
        Some(1)
    );
    assert_eq!(fcpd(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_fields_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "B", 150, 2, false);
    let (_, report) = detect(&path, &["--trace", "--estimator", "bartlett"]);
    for key in [
        "statistic",
        "k_hat",
        "d",
        "aligned",
        "estimator",
        "critical_value",
        "alpha",
        "reject",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["estimator"], Value::String("bartlett".into()));
    assert_eq!(report["trace"].as_array().unwrap().len(), 149);
    let (_, plain) = detect(&path, &[]);
    assert!(plain.get("trace").is_none());
}

#[test]
fn curve_and_coefficient_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = generate(dir.path(), "D", 120, 5, false);
    let curves = generate(dir.path(), "D", 120, 5, true);
    let (_, a) = detect(&coeffs, &[]);
    let (_, b) = detect(&curves, &["--curves"]);
    let (x, y) = (
        a["statistic"].as_f64().unwrap(),
        b["statistic"].as_f64().unwrap(),
    );
    assert!((x - y).abs() < 1e-6, "{x} vs {y}");
}

#[test]
fn generation_is_reproducible_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = fcpd(&[
            "gen",
            "--scenario",
            "F",
            "--n",
            "40",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["parameters"]["args"]["scenario"], "F");
    assert!(manifest["version"].is_string() && manifest["timestamp"].is_string());
}

#[test]
fn simulate_emits_wide_rows() {
    let o = fcpd(&[
        "simulate",
        "--scenario",
        "A,C",
        "--n",
        "60,80",
        "--reps",
        "100",
        "--crit-reps",
        "10000",
        "--grid",
        "256",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,n,reps,standard,aligned,generalized,aligned_generalized,critical_value"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("A,60,100,"));
    assert!(lines[4].starts_with("C,80,100,"));
}

#[test]
fn critval_single_and_table() {
    let o = fcpd(&["critval", "--d", "1", "--alpha", "0.10"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 1.2238).abs() < 0.01);

    let o = fcpd(&[
        "critval", "--table", "--reps", "10000", "--grid", "256", "--seed", "4",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 16);
    assert_eq!(text.lines().next().unwrap(), "d,alpha,value");

    assert_eq!(fcpd(&["critval", "--reps", "50"]).status.code(), Some(1));
}

#[test]
fn component_export_layout() {
    let o = fcpd(&[
        "components",
        "--scenario",
        "C",
        "--n",
        "200",
        "--count",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels, ["1", "2", "3", "4", "aligned", "delta"]);

    let o = fcpd(&[
        "components",
        "--scenario",
        "A",
        "--count",
        "3",
        "--coefficients",
    ]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 3 + 1);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 2 + 25);
}

#[test]
fn oracle_quantities() {
    let value = |args: &[&str]| -> f64 { stdout(&fcpd(args)).trim().parse().unwrap() };
    assert!((value(&["oracle", "--scenario", "B", "--what", "Gg"]) - 1.0 / 36.0).abs() < 1e-9);
    assert!((value(&["oracle", "--scenario", "B", "--what", "sup"]) - 1.0 / 12.0).abs() < 1e-9);
    assert!(
        (value(&["oracle", "--scenario", "B", "--what", "sn", "--n", "5000"]) - 11.0 / 36.0).abs()
            < 1e-9
    );
    assert_eq!(
        fcpd(&["oracle", "--scenario", "F", "--what", "sn"])
            .status
            .code(),
        Some(1)
    );
    let o = fcpd(&[
        "oracle",
        "--scenario",
        "F",
        "--what",
        "Gg",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["values"].as_array().unwrap().len(), 2);
}
