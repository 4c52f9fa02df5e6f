//! End-to-end acceptance run: execute all twelve verification gates in
//! order and print one verdict line per criterion (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Tolerances are pinned inside `quantfp::verify`; this target only
//! reports and asserts the conjunction.

use std::time::Instant;

use quantfp::verify;

#[test]
fn acceptance() {
    let mut failures: Vec<String> = Vec::new();
    for id in 1..=12 {
        let start = Instant::now();
        let gate = verify::run_gate(id).expect("gates 1..=12 exist");
        let elapsed = start.elapsed().as_secs_f64();
        let verdict = if gate.passed { "PASS" } else { "FAIL" };
        let numbers = gate
            .measured
            .iter()
            .map(|(key, value)| format!("{key}={value:.4e}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!(
            "[{verdict}] gate {id:>2} {name:<24} ({elapsed:6.1}s) {numbers}",
            name = gate.name
        );
        if let Some(detail) = &gate.detail {
            println!("                 error: {detail}");
        }
        if !gate.passed {
            failures.push(format!("gate {id} ({})", gate.name));
        }
    }
    assert!(failures.is_empty(), "acceptance failures: {}", failures.join(", "));
}
