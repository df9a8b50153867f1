//! Acceptance gate: one test per verification criterion, each printing its
//! pass/fail line with the measured quantities. The criteria and their
//! tolerances are pinned in `seqcv_core::verify`; the CLI `seqcv verify`
//! runs the same suite.

use seqcv_core::verify::run_criterion;

fn check(id: u32) {
    let report = run_criterion(id);
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn criterion_01_koksma_normalizer_bound() {
    check(1);
}

#[test]
fn criterion_02_riemann_delta_bound() {
    check(2);
}

#[test]
fn criterion_03_cv_oracle_equivalence() {
    check(3);
}

#[test]
fn criterion_04_deterministic_drift_limit() {
    check(4);
}

#[test]
fn criterion_05_distributional_fclt() {
    check(5);
}

#[test]
fn criterion_06_ito_isometry_variance() {
    check(6);
}

#[test]
fn criterion_07_anscombe_first_passage_ratio() {
    check(7);
}

#[test]
fn criterion_08_random_time_horizon_fclt() {
    check(8);
}

#[test]
fn criterion_09_garch_generator_moments() {
    check(9);
}

#[test]
fn criterion_10_q_scaling_probe() {
    check(10);
}

#[test]
fn criterion_11_contract_suite() {
    check(11);
}
