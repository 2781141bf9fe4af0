use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn nlwr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlwr")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn run_bundled_scenario() {
    let out = tempfile::tempdir().unwrap();
    let o = nlwr(&[
        "run",
        scenario("greenshields_riemann.json").to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
        "--threads",
        "2",
        "--strict-inequalities",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep.csv", "scaling.csv", "fits.csv", "manifest.json", "diagnostics_0.025.csv"] {
        assert!(out.path().join(f).is_file(), "{f} missing");
    }
    let sweep = fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 6);
    assert!(sweep.starts_with("epsilon,status,err_w,err_u"));

    // the manifest alone reproduces the sweep
    let again = tempfile::tempdir().unwrap();
    let o = nlwr(&[
        "run",
        out.path().join("manifest.json").to_str().unwrap(),
        "--out-dir",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(sweep, fs::read_to_string(again.path().join("sweep.csv")).unwrap());
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(scenario("greenshields_riemann.json"))
        .unwrap()
        .replace("\"u_left\": 0.0", "\"u_left\": 1.2")
        .replace("0.4,", "0.01,");
    fs::write(&bad, text).unwrap();
    let o = nlwr(&["run", bad.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("0 ≤ u₀ ≤ 1") && err.contains("strictly decreasing"), "{err}");
}

#[test]
fn oracle_suite_is_deterministic() {
    let a = nlwr(&["oracle-suite", "--seed", "7"]);
    let b = nlwr(&["oracle-suite", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn kernels_inspect_exponential() {
    let o = nlwr(&["kernels", "inspect", "exponential", "--epsilon", "0.1", "--dx", "0.025"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let tail: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("truncation_tail"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let weights: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with(char::is_numeric))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let sum: f64 = weights.iter().sum();
    assert!((sum - (1.0 - tail)).abs() <= 1e-14, "{sum} vs 1 - {tail}");
    // center weights: half a cell, then geometric with ratio e^{-dx/ε}
    let r = (-0.25f64).exp();
    assert!((weights[0] - (1.0 - (-0.125f64).exp())).abs() <= 1e-15);
    for p in weights[1..].windows(2) {
        assert!((p[1] / p[0] - r).abs() <= 1e-12);
    }
}

#[test]
fn riemann_table_emits_exact_solutions() {
    let o = nlwr(&["riemann-table", "--t", "0.5", "--n-cells", "4", "--pair", "1,0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "x,u_1_0");
    assert_eq!(rows.len(), 5);
    // fan u = (1 − x/t)/2 on |x| ≤ t runs from 1 to 0.5 across [-0.5, 0]
    assert_eq!(rows[2], "-0.25,0.75");
}
