use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn egf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egf"))
        .args(args)
        .output()
        .expect("run egf")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn err_json(out: Output) -> (i32, Value) {
    assert!(!out.status.success());
    let v = serde_json::from_slice(&out.stderr).expect("stderr is json");
    (out.status.code().unwrap(), v)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_learn_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (data, test, model) = (dir.path().join("data"), dir.path().join("test"), dir.path().join("pod"));
    let common = ["--problem", "poisson1d", "--sensors", "200", "--lengthscale", "0.02"];
    let mut args = vec!["generate"];
    args.extend(common);
    args.extend(["--samples", "150", "--seed", "3", "--out", p(&data)]);
    let v = ok_json(egf(&args));
    assert_eq!(v["manifest"]["n_samples"], 150);

    let mut args = vec!["generate"];
    args.extend(common);
    args.extend(["--samples", "20", "--seed", "4", "--out", p(&test)]);
    ok_json(egf(&args));

    let v = ok_json(egf(&["learn-pod", "--data", p(&data), "--rank", "20", "--out", p(&model)]));
    assert_eq!(v["manifest"]["rank"], 20);
    assert_eq!(v["manifest"]["provenance"], "pod");

    let v = ok_json(egf(&["evaluate", "--model", p(&model), "--data", p(&test)]));
    assert!(v["epsilon_percent"].as_f64().unwrap() < 10.0);
    assert!(v["test_error_percent"].as_f64().unwrap() < 10.0);
}

#[test]
fn learn_rsvd_interpolate_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let mut knots = Vec::new();
    for theta in ["2", "3", "4", "3.5"] {
        let out = dir.path().join(format!("airy-{theta}"));
        ok_json(egf(&[
            "learn-rsvd", "--problem", "airy1d", "--theta", theta, "--sensors", "300",
            "--lengthscale", "0.01", "--samples", "40", "--rank", "30", "--out", p(&out),
        ]));
        knots.push(out);
    }
    let target = knots.pop().unwrap();
    let interp = dir.path().join("interp");
    let mut args = vec!["interpolate", "--theta", "3.5", "--scheme", "linear", "--out", p(&interp), "--models"];
    args.extend(knots.iter().map(|k| p(k)));
    let v = ok_json(egf(&args));
    assert_eq!(v["manifest"]["provenance"], "interpolated");
    assert_eq!(v["manifest"]["interpolation"]["origin_theta"], 3.0);
    assert_eq!(v["manifest"]["interpolation"]["scheme"], "piecewise-linear");

    let v = ok_json(egf(&["evaluate", "--model", p(&interp), "--reference", p(&target)]));
    assert!(v["epsilon_vs_reference_percent"].as_f64().unwrap() < 10.0);
}

#[test]
fn report_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(egf(&[
        "report", "--recipe", "poisson1d-noisy", "--sensors", "200", "--samples", "100",
        "--rank", "20", "--lengthscale", "0.02", "--set", "rsvd-samples=30", "--set",
        "test-samples=10", "--out", p(dir.path()),
    ]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("data/poisson1d-noisy_sigma.csv").exists());
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let (code, v) = err_json(egf(&["generate", "--problem", "laplace3d", "--out", p(&out)]));
    assert_eq!(code, 1);
    assert_eq!(v["error"], "invalid-argument");

    let (code, v) = err_json(egf(&["report", "--recipe", "nope", "--out", p(&out)]));
    assert_eq!(code, 1);
    assert_eq!(v["error"], "unknown-recipe");

    let (code, v) = err_json(egf(&["evaluate", "--model", p(&out)]));
    assert_eq!(code, 1);
    assert_eq!(v["error"], "io");

    let (code, v) = err_json(egf(&["learn-pod", "--bogus"]));
    assert_eq!(code, 2);
    assert_eq!(v["error"], "usage");

    let (_, v) = err_json(egf(&[
        "learn-rsvd", "--problem", "fractional-laplacian1d", "--theta", "1.5", "--sensors", "64",
        "--out", p(&out),
    ]));
    assert_eq!(v["error"], "invalid-argument");
    assert!(v["message"].as_str().unwrap().contains("1.5"));
}
