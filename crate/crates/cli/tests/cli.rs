//! End-to-end runs of the `dyadic` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dyadic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

/// λ = {root: 1}, σ = μ = (1, 1), depth 1.
const SINGLE_CUBE: &str = r#"{
    "dimension": 1, "depth": 1, "sigma": [1, 1], "mu": [1, 1],
    "lambda": [{"level": 0, "index": [0], "value": 1}],
    "exponents": {"p": 3, "q": 2, "s": 2}
}"#;

const WOLFF: &str = r#"{
    "dimension": 1, "depth": 1, "sigma": [1, 1], "mu": [1, 1], "lambda": [],
    "exponents": {"p": 3, "q": 2, "s": "inf"},
    "f": [1, 1], "wolff": {"alpha": 0.5, "s": 2}
}"#;

/// Half of the demand sits on a leaf of zero mass.
const POINT_MASS: &str = r#"{
    "dimension": 1, "depth": 1, "sigma": [1, 1], "mu": [1, 0],
    "lambda": [{"level": 0, "index": [0], "value": 0.5}, {"level": 1, "index": [0], "value": 0.5}],
    "exponents": {"p": 3, "q": 2, "s": 2},
    "expect_infeasible": true
}"#;

fn run_on(json: &str, args: &[&str]) -> Output {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "instance.json", json);
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--instance", path.to_str().unwrap()]);
    dyadic(&all)
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn eval_norm_single_cube_closed_form() {
    let out = run_on(SINGLE_CUBE, &["eval", "norm"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let value = value_after(&text, "operator_norm = ");
    assert!((value - 2f64.powf(7.0 / 6.0)).abs() < 1e-9, "{text}");
    assert!(text.contains("2.2449"));
}

#[test]
fn eval_norm_empty_lambda_is_zero() {
    let out = run_on(WOLFF, &["eval", "norm"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(value_after(&stdout(&out), "operator_norm = "), 0.0);
}

#[test]
fn eval_wolff_hand_value() {
    let out = run_on(WOLFF, &["eval", "wolff"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(value_after(&text, "W[0] = "), 1.5);
    assert_eq!(value_after(&text, "W[1] = "), 1.5);
}

#[test]
fn eval_t_and_adjoint_write_csv() {
    let dir = TempDir::new().unwrap();
    let json = SINGLE_CUBE.replace(
        "\"exponents\"",
        "\"f\": [1, 3], \"g\": [{\"level\": 0, \"index\": [0], \"value\": 2}], \"exponents\"",
    );
    let path = write(dir.path(), "i.json", &json);
    let csv = dir.path().join("t.csv");
    let out = dyadic(&[
        "eval",
        "T",
        "--instance",
        path.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // (Tf)_root = λ_root ∫ f dσ = 4
    assert_eq!(value_after(&stdout(&out), "Tf root = "), 4.0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("level,index,value"));
    assert_eq!(table.lines().count(), 4);

    let out = dyadic(&["eval", "Tstar", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // (T*g)(x) = λ_root g_root μ(root) = 4 on both leaves
    assert_eq!(value_after(&stdout(&out), "T*g[0] = "), 4.0);
}

#[test]
fn check_dor_atomic_point_mass_is_expected_infeasible() {
    let out = run_on(POINT_MASS, &["check", "dor", "--atomic-mode"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("Infeasible(root)"));
}

#[test]
fn check_dor_fractional_exact_allocates() {
    let json = POINT_MASS.replace(
        "\"expect_infeasible\": true",
        "\"expect_infeasible\": false",
    );
    let out = run_on(&json, &["check", "dor", "--exact"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("mu(E root) = 1/2 (target 1/2)"));
}

#[test]
fn check_sparse_root_family() {
    let json = SINGLE_CUBE.replace(
        "\"exponents\"",
        "\"families\": {\"F\": [{\"level\": 0, \"index\": [0]}]}, \"exponents\"",
    );
    for exact in [false, true] {
        let args: &[&str] = if exact {
            &["check", "sparse", "--exact"]
        } else {
            &["check", "sparse"]
        };
        let out = run_on(&json, args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stdout(&out).contains("sigma_sparse = true"));
    }
}

#[test]
fn check_equivalence_zero_lambda() {
    let out = run_on(WOLFF, &["check", "thm12"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(value_after(&text, "operator_norm = "), 0.0);
    assert_eq!(value_after(&text, "condition_sup = "), 0.0);
}

#[test]
fn remaining_checks_pass_on_a_small_instance() {
    let json = r#"{
        "dimension": 1, "depth": 2, "sigma": [1, 2, 0.5, 1], "mu": [0.5, 1, 1, 2],
        "lambda": [{"level": 0, "index": [0], "value": 1}, {"level": 1, "index": [1], "value": 0.5},
                   {"level": 2, "index": [2], "value": 2}],
        "exponents": {"p": 3, "q": 2, "s": 3},
        "f": [1, 0, 2, 1],
        "g": [{"level": 0, "index": [0], "value": 1}, {"level": 2, "index": [3], "value": 1}],
        "families": {"F": [{"level": 0, "index": [0]}]},
        "beta": [{"level": 0, "index": [0], "value": 1}],
        "weak": {"alpha": 1.5, "set": [1, 1, 0, 0.5]}
    }"#;
    for what in [
        "thm12", "thm11", "carleson", "dor", "lemma45", "lemma47", "weak",
    ] {
        let out = run_on(json, &["check", what]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{what}: {}{}",
            stdout(&out),
            stderr(&out)
        );
        assert!(!stdout(&out).contains("FAIL"), "{what}: {}", stdout(&out));
    }
    for what in ["norm", "T", "Tstar", "mixed", "weak"] {
        let out = run_on(json, &["eval", what]);
        assert_eq!(out.status.code(), Some(0), "{what}: {}", stderr(&out));
    }
}

#[test]
fn schema_violation_exits_2_with_path() {
    let bad = SINGLE_CUBE.replace("\"mu\": [1, 1]", "\"mu\": [1, \"heavy\"]");
    let out = run_on(&bad, &["eval", "norm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mu[1]"), "{}", stderr(&out));

    let short = SINGLE_CUBE.replace("\"sigma\": [1, 1]", "\"sigma\": [1]");
    let out = run_on(&short, &["eval", "norm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigma"));

    let out = run_on(SINGLE_CUBE, &["eval", "T"]);
    assert_eq!(out.status.code(), Some(2), "missing f is an input error");
}

#[test]
fn evaluator_error_exits_3() {
    // the dual witness needs a finite s
    let out = run_on(WOLFF, &["check", "lemma45"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("evaluator error"));
}

#[test]
fn suite_sizes_zero_passes() {
    let out = dyadic(&["suite", "--seed", "42", "--sizes", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("\"passed\": true"));
}

#[test]
fn suite_invalid_seed_exits_2() {
    let out = dyadic(&["suite", "--seed", "forty-two"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn suite_outputs_and_thread_independence() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let csv = dir.path().join("gates.csv");
    let one = dyadic(&[
        "suite",
        "--seed",
        "7",
        "--sizes",
        "3",
        "--threads",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let three = dyadic(&["suite", "--seed", "7", "--sizes", "3", "--threads", "3"]);
    assert_eq!(one.stdout, three.stdout);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["gates"].as_array().unwrap().len(), 11);
    let bands = std::fs::read_to_string(out_dir.join("bands.csv")).unwrap();
    assert_eq!(bands.lines().count(), 4);
    let wolff = std::fs::read_to_string(out_dir.join("wolff.csv")).unwrap();
    assert_eq!(wolff.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 12);
}
