//! Acceptance gate: every check must pass at its pinned tolerance.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see one line
//! per check with the measured values.

use reservoir_ipc::acceptance::{run_suite, SuiteOptions};

#[test]
fn full_acceptance_suite_passes() {
    let options = SuiteOptions {
        quick: false,
        threads: 0,
        out_dir: None,
    };
    let outcomes = run_suite(&options).expect("suite runs to completion");
    assert_eq!(outcomes.len(), 9, "expected the full set of checks");

    let total = outcomes.len();
    let mut failed = Vec::new();
    for (idx, outcome) in outcomes.iter().enumerate() {
        println!(
            "[{}/{}] {} {} — {}",
            idx + 1,
            total,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.detail
        );
        if !outcome.passed {
            failed.push(outcome.name);
        }
    }
    assert!(failed.is_empty(), "failed acceptance checks: {failed:?}");
}
