//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Tolerances are pinned here and checked against the raw gate reports, so
//! a change to a gate's internal bound cannot silently loosen a criterion.

use std::process::Command;
use std::time::{Duration, Instant};

use dyadic_core::suite::{
    gate_adjoint, gate_allocation, gate_boundedness, gate_decomposition, gate_dual_witness,
    gate_endpoints, gate_lambda2, gate_mixed_norm, gate_sparse_carleson, gate_wolff, GateReport,
};

const SEED: u64 = 42;

const ADJOINT_TOL: f64 = 1e-12;
const ADJOINT_TIME: Duration = Duration::from_secs(10);
const MIXED_TOL: f64 = 1e-12;
const DECOMPOSITION_LOWER_TOL: f64 = 1e-12;
const ALLOCATION_TOL: f64 = 1e-9;
const LAMBDA_GAP: f64 = 0.02;
const LAMBDA_TIME: Duration = Duration::from_secs(60);
const WITNESS_TOL: f64 = 1e-9;
const ENDPOINT_TOL: f64 = 1e-10;
const HOMOGENEITY_TOL: f64 = 1e-10;
const BAND: f64 = 32.0;
const ORACLE_GAP: f64 = 0.01;
const NECESSITY: f64 = 16.0;

struct Criterion {
    number: u32,
    passed: bool,
    detail: String,
}

fn note(report: &GateReport, key: &str) -> f64 {
    *report
        .notes
        .get(key)
        .unwrap_or_else(|| panic!("gate {} lacks note {key}", report.criterion))
}

fn timed<T>(run: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = run();
    (out, start.elapsed())
}

fn criterion(number: u32, report: &GateReport, passed: bool, extra: String) -> Criterion {
    Criterion {
        number,
        passed: passed && report.passed,
        detail: format!("{} | {extra}", report.line()),
    }
}

fn suite_bytes() -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_dyadic"))
        .args(["suite", "--seed", "42", "--threads", "1"])
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

#[test]
fn acceptance() {
    let mut results = Vec::new();

    let (r, t) = timed(|| gate_adjoint(SEED, 1000));
    results.push(criterion(
        1,
        &r,
        r.worst <= ADJOINT_TOL && t < ADJOINT_TIME,
        format!(
            "relative error {:.3e} <= {ADJOINT_TOL:e}, {:.2?} < {ADJOINT_TIME:?}",
            r.worst, t
        ),
    ));

    let r = gate_mixed_norm(SEED, 1000);
    results.push(criterion(
        2,
        &r,
        r.worst <= MIXED_TOL && note(&r, "instances_with_s_infinite") > 0.0,
        format!(
            "gap {:.3e}, s = inf instances {}",
            r.worst,
            note(&r, "instances_with_s_infinite")
        ),
    ));

    let r = gate_decomposition(SEED, 200);
    let lower = note(&r, "max_lower_violation");
    results.push(criterion(
        3,
        &r,
        lower <= DECOMPOSITION_LOWER_TOL && r.worst <= 1.0,
        format!(
            "lower violation {lower:.3e}, upper / 3p {:.4}, max ratio {:.4}",
            r.worst,
            note(&r, "max_ratio")
        ),
    ));

    let r = gate_sparse_carleson(SEED, 500);
    results.push(criterion(
        4,
        &r,
        r.worst == 0.0,
        format!(
            "disagreements {}, sparse families {}",
            r.worst,
            note(&r, "sparse_families")
        ),
    ));

    let r = gate_allocation(SEED, 500);
    let exact_failures = note(&r, "exact_failures");
    let counterexample = note(&r, "atomic_counterexample_infeasible");
    results.push(criterion(
        5,
        &r,
        r.worst <= ALLOCATION_TOL && exact_failures == 0.0 && counterexample == 1.0,
        format!("float error {:.3e}, exact failures {exact_failures}, atomic infeasible {counterexample}", r.worst),
    ));

    let (r, t) = timed(|| gate_lambda2(SEED, 100));
    results.push(criterion(
        6,
        &r,
        r.worst <= LAMBDA_GAP && t < LAMBDA_TIME,
        format!(
            "relative gap {:.3e} <= {LAMBDA_GAP}, {:.2?} < {LAMBDA_TIME:?}",
            r.worst, t
        ),
    ));

    let r = gate_dual_witness(SEED, 300);
    let shortfall = note(&r, "max_ratio_shortfall");
    let excess = note(&r, "max_denominator_excess");
    results.push(criterion(
        7,
        &r,
        shortfall <= WITNESS_TOL && excess <= WITNESS_TOL,
        format!("ratio shortfall {shortfall:.3e}, denominator excess {excess:.3e}"),
    ));

    let r = gate_endpoints(SEED, 200);
    let dependent = note(&r, "allocation_dependent_at_s_eq_q");
    results.push(criterion(
        8,
        &r,
        r.worst <= ENDPOINT_TOL && dependent == 0.0,
        format!(
            "linearization gap {:.3e}, allocation-dependent at s = q {dependent}",
            r.worst
        ),
    ));

    let (band, necessity, rows) = gate_boundedness(SEED, 50, 20);
    let low = note(&band, "band_low");
    let high = note(&band, "band_high");
    let homogeneity = note(&band, "max_homogeneity_error");
    let oracle = note(&band, "max_oracle_gap");
    results.push(criterion(
        9,
        &band,
        rows.len() == 50 && low >= 1.0 / BAND && high <= BAND && homogeneity <= HOMOGENEITY_TOL && oracle <= ORACLE_GAP,
        format!("realized band [{low:.4}, {high:.4}], homogeneity {homogeneity:.3e}, oracle gap {oracle:.3e}"),
    ));
    let cond1 = note(&necessity, "max_cond1_ratio");
    let cond2 = note(&necessity, "max_cond2_ratio");
    results.push(criterion(
        10,
        &necessity,
        cond1 <= NECESSITY && cond2 <= NECESSITY,
        format!("max cond1 / norm {cond1:.4}, max cond2 / norm {cond2:.4}"),
    ));

    let (r, _) = gate_wolff(SEED, 50);
    let hand = note(&r, "hand_value_exact");
    let sandwich = note(&r, "sandwich_failures");
    let sparse = note(&r, "sparse_failures");
    results.push(criterion(
        11,
        &r,
        hand == 1.0 && sandwich == 0.0 && sparse == 0.0 && r.worst <= 1.0,
        format!(
            "hand value exact {hand}, sandwich failures {sandwich}, sparse failures {sparse}, max ratio / 2^s*8 {:.4}, max ratio {:.4}",
            r.worst,
            note(&r, "max_domination_ratio")
        ),
    ));

    let (first, code_a) = suite_bytes();
    let (second, code_b) = suite_bytes();
    results.push(Criterion {
        number: 12,
        passed: first == second && !first.is_empty() && code_a == 0 && code_b == 0,
        detail: format!(
            "criterion 12 CLI determinism {} ({} bytes, exit codes {code_a}/{code_b})",
            if first == second {
                "identical"
            } else {
                "differ"
            },
            first.len()
        ),
    });

    println!();
    for c in &results {
        println!("[{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed: Vec<u32> = results
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.number)
        .collect();
    println!(
        "{} / {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
