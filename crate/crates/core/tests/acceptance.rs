//! One pass/fail line per acceptance criterion. Lines go straight to the
//! process's stderr so that they show up even when output is captured.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{build, program_for, TermGen};
use omni_infer::constraint::{Constraint, Origin, Pattern};
use omni_infer::driver::{binding_constraint, check_program, check_source, BindingReport, DriverOptions, Outcome};
use omni_infer::oracle::{GroundUniverse, Oracle};
use omni_infer::solver::{solve, ConjunctionOrder, SolveError, SolverOptions};
use omni_infer::surface::{Span, Term};
use omni_infer::types::{is_instance, LabelEnv, RecordDecl, Scheme, TyVar, Type};
use omni_infer::unify::{Engine, UnifyError};

/// Rule applications allowed per squared constraint size. Measured maximum
/// over the corpus and 8000 random terms of size up to 24 was 0.44.
const STEP_FACTOR: u64 = 1;
const RANDOM_TERMS: usize = 500;
const MAX_TERM_SIZE: usize = 8;
const UNIVERSE_DEPTH: usize = 2;
const CORPUS_BUDGET: Duration = Duration::from_secs(1);
const RANDOM_BUDGET: Duration = Duration::from_secs(120);

fn line(criterion: u32, name: &str, failures: &[String], detail: &str) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "acceptance {criterion} {name}: {status} ({detail})").unwrap();
    for f in failures.iter().take(10) {
        writeln!(err, "    {f}").unwrap();
    }
}

fn corpus_files() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn with_order(order: ConjunctionOrder) -> DriverOptions {
    let mut opts = DriverOptions::default();
    opts.solver.order = order;
    opts
}

fn cyclic_matches() -> Constraint {
    let (a, b) = (TyVar(0), TyVar(1));
    let origin = |what: &str| Origin::new(Span::default(), what);
    Constraint::exists(
        vec![a, b],
        Constraint::and(
            Constraint::match_(Type::var(a), vec![(Pattern::Wildcard, Constraint::eq(Type::var(b), Type::bool()))], origin("first")),
            Constraint::match_(Type::var(b), vec![(Pattern::Wildcard, Constraint::eq(Type::var(a), Type::int()))], origin("second")),
        ),
    )
}

fn signature_labels() -> LabelEnv {
    let mut env = LabelEnv::new();
    let field = |l: &str| (l.to_string(), Type::int());
    env.declare(RecordDecl { name: "point".into(), params: vec![], fields: vec![field("x"), field("y")] }).unwrap();
    env.declare(RecordDecl { name: "gray_point".into(), params: vec![], fields: vec![field("x"), field("y"), field("color")] })
        .unwrap();
    env
}

/// One random term checked by both the solver and the oracle.
struct Sample {
    term: Term,
    report: BindingReport,
    /// Most general root types of the oracle's successful paths.
    leaves: Vec<Type>,
    typable: bool,
    ground: Vec<Type>,
}

struct RandomRun {
    samples: Vec<Sample>,
    elapsed: Duration,
    oracle_errors: Vec<String>,
}

fn random_run() -> &'static RandomRun {
    static RUN: OnceLock<RandomRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let labels = signature_labels();
        let universe = GroundUniverse::for_labels(&labels, UNIVERSE_DEPTH);
        universe.check_diversity().unwrap();
        let oracle = Oracle::new(&labels);
        let mut gen = TermGen::new(2024);
        let mut samples = Vec::new();
        let mut oracle_errors = Vec::new();
        let start = Instant::now();
        for _ in 0..RANDOM_TERMS {
            let term = gen.term(MAX_TERM_SIZE);
            let report = check_program(&program_for(&term), &DriverOptions::default()).unwrap();
            let report = report.bindings.into_iter().next().unwrap();
            let bc = binding_constraint("t", &term, &labels, &HashMap::new()).unwrap();
            match oracle.analyze(&bc.open, bc.root) {
                Ok(a) => {
                    let ground = a.ground_typings(&universe);
                    samples.push(Sample { term, report, typable: a.typable(), leaves: a.leaves, ground });
                }
                Err(e) => oracle_errors.push(format!("{}: {e}", omni_infer::surface::print_term(&term))),
            }
        }
        RandomRun { samples, elapsed: start.elapsed(), oracle_errors }
    })
}

fn show(t: &Term) -> String {
    omni_infer::surface::print_term(t)
}

#[test]
fn criterion_1_corpus_fidelity() {
    let mut failures = Vec::new();
    let start = Instant::now();
    let mut bindings = 0;
    for (name, src) in corpus_files() {
        match check_source(&src, &DriverOptions::default()) {
            Ok(r) => {
                for b in &r.bindings {
                    bindings += 1;
                    if b.expect.is_none() {
                        failures.push(format!("{name}: binding {} has no expectation", b.name));
                    }
                    if let Some(why) = &b.unmet {
                        failures.push(format!("{name}: {}: {why}", b.name));
                    }
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    match solve(&cyclic_matches(), &LabelEnv::new(), &SolverOptions::default()).0 {
        Err(SolveError::Ambiguous(_)) => {}
        other => failures.push(format!("cyclic matches: expected ambiguity, got {other:?}")),
    }
    let elapsed = start.elapsed();
    if elapsed > CORPUS_BUDGET {
        failures.push(format!("corpus took {elapsed:?}"));
    }
    line(1, "corpus fidelity", &failures, &format!("{bindings} bindings plus the cyclic constraint in {elapsed:?}"));
    assert!(failures.is_empty());
}

#[test]
fn criterion_2_oracle_equivalence() {
    let run = random_run();
    let mut failures: Vec<String> = run.oracle_errors.clone();
    let mut accepted = 0;
    let mut with_shallow_typing = 0;
    for s in &run.samples {
        let solver_accepts = matches!(s.report.outcome, Outcome::Accepted(_));
        accepted += solver_accepts as usize;
        with_shallow_typing += !s.ground.is_empty() as usize;
        if solver_accepts != s.typable {
            failures.push(format!("{}: solver {}, oracle typable {}", show(&s.term), s.report.line(), s.typable));
        }
        // A ground typing within the finite universe is in particular a typing.
        if !s.ground.is_empty() && !s.typable {
            failures.push(format!("{}: ground typings without a successful path", show(&s.term)));
        }
    }
    if run.elapsed > RANDOM_BUDGET {
        failures.push(format!("took {:?}", run.elapsed));
    }
    let detail = format!(
        "{} terms, {accepted} accepted, {with_shallow_typing} with a typing of depth {UNIVERSE_DEPTH}, {:?}",
        run.samples.len(),
        run.elapsed
    );
    line(2, "oracle equivalence", &failures, &detail);
    assert!(failures.is_empty());
}

#[test]
fn criterion_3_principality() {
    let run = random_run();
    let universe = GroundUniverse::for_labels(&signature_labels(), UNIVERSE_DEPTH);
    let mut failures = Vec::new();
    let mut checked = 0;
    for s in &run.samples {
        let Outcome::Accepted(scheme) = &s.report.outcome else { continue };
        checked += 1;
        for g in s.ground.iter().chain(&s.leaves) {
            if !is_instance(scheme, g) {
                failures.push(format!("{}: typing {g} is not an instance of {scheme}", show(&s.term)));
            }
        }
        // The converse: the scheme claims nothing the oracle rejects.
        if let Some(g) = universe.types().iter().find(|g| is_instance(scheme, g) && !s.ground.contains(g)) {
            failures.push(format!("{}: instance {g} of {scheme} is not a typing", show(&s.term)));
        }
    }
    line(3, "principality", &failures, &format!("{checked} accepted terms"));
    assert!(failures.is_empty());
}

#[test]
fn criterion_4_unifier_properties() {
    let mut failures = Vec::new();
    let mut vars = HashMap::new();
    let mut g = Engine::new();
    let a = Type::var(TyVar(0));
    let na = build(&mut g, &a, &mut vars);
    let cyc = build(&mut g, &Type::arrow(a.clone(), a.clone()), &mut vars);
    if !matches!(g.unify(na, cyc), Err(UnifyError::Cycle { .. })) {
        failures.push("α = α → α was not rejected".to_string());
    }
    let (x, y) = (TyVar(10), TyVar(11));
    let id_x = Type::poly(vec![x], Type::arrow(Type::var(x), Type::var(x)));
    let id_y = Type::poly(vec![y], Type::arrow(Type::var(y), Type::var(y)));
    let konst = Type::poly(vec![x, y], Type::arrow(Type::var(x), Type::arrow(Type::var(y), Type::var(x))));
    let mut g = Engine::new();
    let (n1, n2, n3) = (build(&mut g, &id_x, &mut vars), build(&mut g, &id_y, &mut vars), build(&mut g, &konst, &mut vars));
    if g.unify(n1, n2).is_err() {
        failures.push("alpha-equivalent polytypes did not unify".to_string());
    }
    if !matches!(g.unify(n1, n3), Err(UnifyError::Clash { .. })) {
        failures.push("distinct polytypes did not clash".to_string());
    }
    let mut runs = 0;
    let corpus_reports = corpus_files().into_iter().flat_map(|(_, src)| {
        check_source(&src, &DriverOptions::default()).map(|r| r.bindings).unwrap_or_default()
    });
    for b in corpus_reports.chain(random_run().samples.iter().map(|s| s.report.clone())) {
        if matches!(b.outcome, Outcome::Accepted(_)) {
            runs += 1;
            if !b.solved_form {
                failures.push(format!("{}: final state not in solved form", b.name));
            }
        }
        if let Outcome::Internal(m) = &b.outcome {
            failures.push(format!("{}: {m}", b.name));
        }
    }
    line(4, "unifier properties", &failures, &format!("solved form checked on {runs} successful runs"));
    assert!(failures.is_empty());
}

#[test]
fn criterion_5_termination_instrumentation() {
    let mut failures = Vec::new();
    let mut reports: Vec<BindingReport> = corpus_files()
        .into_iter()
        .flat_map(|(_, src)| check_source(&src, &DriverOptions::default()).unwrap().bindings)
        .collect();
    reports.extend(random_run().samples.iter().map(|s| s.report.clone()));
    // Larger terms than the equivalence suite, solver only.
    let mut gen = TermGen::new(77);
    for _ in 0..500 {
        let term = gen.term(24);
        reports.extend(check_program(&program_for(&term), &DriverOptions::default()).unwrap().bindings);
    }
    let mut worst = 0.0f64;
    for b in &reports {
        let n = b.constraint_size as u64;
        if n == 0 {
            continue;
        }
        worst = worst.max(b.stats.steps as f64 / (n * n) as f64);
        if b.stats.steps > STEP_FACTOR * n * n {
            failures.push(format!("{}: {} steps for constraint size {n}", b.name, b.stats.steps));
        }
        if b.stats.match_counts.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("{}: a rule increased the number of matches", b.name));
        }
        if b.stats.app_steps.iter().any(|(before, after)| after >= before) {
            failures.push(format!("{}: an instantiation step did not consume an instantiation", b.name));
        }
    }
    let detail = format!("{} runs, worst steps/size² {worst:.3}, bound {STEP_FACTOR}", reports.len());
    line(5, "termination instrumentation", &failures, &detail);
    assert!(failures.is_empty());
}

#[test]
fn criterion_6_order_independence() {
    let mut failures = Vec::new();
    let mut schemes: Vec<(String, Scheme)> = Vec::new();
    let pid = "let pid = [ fun x -> x : 'a. 'a -> 'a ]\n";
    for (name, body) in [("ex_6_2", "app (fun p -> <p>) pid"), ("ex_6_3", "rev_app pid (fun p -> <p>)")] {
        for order in [ConjunctionOrder::LeftFirst, ConjunctionOrder::RightFirst] {
            let src = format!("{pid}let {name} = {body}");
            let r = check_source(&src, &with_order(order)).unwrap();
            match &r.bindings[1].outcome {
                Outcome::Accepted(s) => schemes.push((format!("{name} {order:?}"), s.clone())),
                _ => failures.push(format!("{name} {order:?}: {}", r.bindings[1].line())),
            }
        }
    }
    for (n, s) in &schemes[1..] {
        if !s.alpha_eq(&schemes[0].1) {
            failures.push(format!("{n}: {s} differs from {} for {}", schemes[0].1, schemes[0].0));
        }
    }
    // Every corpus binding and random term, under both orders.
    let mut programs: Vec<String> = corpus_files().into_iter().map(|(_, src)| src).collect();
    let mut gen = TermGen::new(5);
    for _ in 0..300 {
        programs.push(omni_infer::surface::print_program(&program_for(&gen.term(12))));
    }
    for src in &programs {
        let l = check_source(src, &with_order(ConjunctionOrder::LeftFirst)).unwrap();
        let r = check_source(src, &with_order(ConjunctionOrder::RightFirst)).unwrap();
        for (a, b) in l.bindings.iter().zip(&r.bindings) {
            let same = match (&a.outcome, &b.outcome) {
                (Outcome::Accepted(x), Outcome::Accepted(y)) => x.alpha_eq(y),
                (Outcome::Ambiguous(_), Outcome::Ambiguous(_)) => true,
                (Outcome::TypeError(_), Outcome::TypeError(_)) => true,
                (Outcome::ScopeError(_), Outcome::ScopeError(_)) => true,
                _ => false,
            };
            if !same {
                failures.push(format!("{}: {} vs {}", a.name, a.line(), b.line()));
            }
        }
    }
    let detail = format!("{} order/term pairs agree on ex_6_2 and ex_6_3; {} programs compared", schemes.len(), programs.len());
    line(6, "order independence", &failures, &detail);
    assert!(failures.is_empty());
}
