use std::path::Path;
use std::process::Command;

use omni_infer::constraint::{Constraint, Origin, Pattern};
use omni_infer::driver::{check_source, DriverOptions, OracleVerdict};
use omni_infer::solver::{solve, SolveError, SolverOptions};
use omni_infer::surface::Span;
use omni_infer::types::{LabelEnv, TyVar, Type};

fn corpus(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.oml"));
    std::fs::read_to_string(path).unwrap()
}

/// Every binding meets its expectation and the oracle agrees.
fn check(name: &str) {
    let opts = DriverOptions { oracle_depth: Some(2), ..DriverOptions::default() };
    let report = check_source(&corpus(name), &opts).unwrap();
    for b in &report.bindings {
        assert_eq!(b.unmet, None, "{}", b.line());
        assert!(matches!(b.oracle, Some(OracleVerdict::Agrees { .. })), "{}: {:?}", b.name, b.oracle);
    }
    assert_eq!(report.exit_code(), 0);
}

macro_rules! corpus_cases {
    ($($name:ident),* $(,)?) => {
        $(#[test] fn $name() { check(stringify!($name)); })*
    };
}

corpus_cases!(
    one,
    ex_1,
    ex_2,
    ex_3,
    ex_4,
    ex_5,
    ex_6,
    ex_6_2,
    ex_6_3,
    ex_7,
    ex_8,
    self_2_1,
    self_2_2,
    backprop_getx,
    getx,
    ex_1_0,
    ex_1_1,
    unbox_lambda,
    unbox_annotated,
    tuple_fst,
);

#[test]
fn ex_8_refines_getx() {
    let report = check_source(&corpus("ex_8"), &DriverOptions::default()).unwrap();
    let ex_8 = report.bindings.iter().find(|b| b.name == "ex_8").unwrap();
    let getx = ex_8.nested.iter().find(|l| l.name == "getx").unwrap();
    assert_eq!(getx.scheme.to_string(), "'a gpoint -> 'a");
}

/// Two matches, each waiting for the other's scrutinee.
#[test]
fn cyclic_matches_are_ambiguous() {
    let (a, b) = (TyVar(0), TyVar(1));
    let origin = |what: &str| Origin::new(Span::default(), what);
    let c = Constraint::exists(
        vec![a, b],
        Constraint::and(
            Constraint::match_(Type::var(a), vec![(Pattern::Wildcard, Constraint::eq(Type::var(b), Type::bool()))], origin("first")),
            Constraint::match_(Type::var(b), vec![(Pattern::Wildcard, Constraint::eq(Type::var(a), Type::int()))], origin("second")),
        ),
    );
    let (res, _) = solve(&c, &LabelEnv::new(), &SolverOptions::default());
    match res {
        Err(SolveError::Ambiguous(stuck)) => assert_eq!(stuck.len(), 2),
        other => panic!("expected ambiguity, got {other:?}"),
    }
}

/// Exit code, stdout and stderr.
fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_omni-infer")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn corpus_path(name: &str) -> String {
    format!("{}/corpus/{name}.oml", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn cli_prints_accepted_scheme() {
    let (code, out, _) = cli(&["check", &corpus_path("ex_3")]);
    assert_eq!(code, 0);
    assert!(out.contains("ex_3 : point -> int * int"), "{out}");
}

#[test]
fn cli_reports_ambiguity() {
    let (code, out, _) = cli(&["check", &corpus_path("ex_1")]);
    // The binding is expected to be ambiguous, so the file as a whole passes.
    assert_eq!(code, 0);
    assert!(out.contains("ex_1 : ambiguous record projection .x"), "{out}");
    let dir = std::env::temp_dir().join(format!("omni-infer-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let unmarked = dir.join("ex_1.oml");
    std::fs::write(&unmarked, corpus("ex_1").replace("(*! ambiguous *)", "")).unwrap();
    let (code, _, _) = cli(&["check", unmarked.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn cli_exit_codes() {
    let dir = std::env::temp_dir().join(format!("omni-infer-codes-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [("empty", "", 0), ("clash", "let f = 1 + true", 1), ("syntax", "let = 3", 3)];
    for (name, src, want) in cases {
        let f = dir.join(format!("{name}.oml"));
        std::fs::write(&f, src).unwrap();
        let (code, _, _) = cli(&["check", f.to_str().unwrap()]);
        assert_eq!(code, want, "{name}");
    }
}

#[test]
fn cli_output_is_deterministic() {
    let args = ["check", &corpus_path("ex_8"), "--print-types", "--trace-solver"];
    let first = cli(&args);
    assert!(first.2.contains("S-Let-Gen"), "{}", first.2);
    for _ in 0..3 {
        assert_eq!(cli(&args), first);
    }
}
