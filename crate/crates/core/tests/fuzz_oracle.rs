mod common;

use common::{program_for, TermGen};
use omni_infer::driver::{check_program, DriverOptions, OracleVerdict, Outcome};
use omni_infer::surface::print_term;

/// Larger terms than the acceptance suite uses, so that let-bound functions
/// applied to records (backpropagation) are well represented.
fn run(seed: u64, count: usize, max_size: usize) {
    let mut gen = TermGen::new(seed);
    let opts = DriverOptions { oracle_depth: Some(2), ..DriverOptions::default() };
    let mut failures = Vec::new();
    for _ in 0..count {
        let term = gen.term(max_size);
        let report = check_program(&program_for(&term), &opts).unwrap();
        let b = &report.bindings[0];
        match (&b.outcome, &b.oracle) {
            (_, Some(OracleVerdict::Disagrees(why))) => failures.push(format!("{}: {why}", print_term(&term))),
            (_, Some(OracleVerdict::Skipped(why))) => failures.push(format!("{}: skipped: {why}", print_term(&term))),
            (Outcome::Internal(m), _) => failures.push(format!("{}: internal {m}", print_term(&term))),
            _ => {}
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn medium_terms_agree_with_oracle() {
    run(11, 400, 12);
}

#[test]
fn large_terms_agree_with_oracle() {
    run(12, 200, 16);
}
