mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use common::{build, program_for, TermGen, PRELUDE};
use omni_infer::congen::Generator;
use omni_infer::driver::binding_constraint;
use omni_infer::oracle::{standard_labels, Oracle};
use omni_infer::surface::{parse_program, print_program, print_term, Item};
use omni_infer::types::{alpha_eq, decompose, shape_apply, LabelEnv, Scheme, TyVar, Type, VarSupply};
use omni_infer::unify::{Engine, UnifyError};

const BINDERS: [u32; 2] = [20, 21];

fn mono() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![
        (0u32..4).prop_map(|i| Type::var(TyVar(i))),
        Just(Type::Unit),
        Just(Type::int()),
        Just(Type::bool()),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::arrow(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::Tuple(vec![a, b])),
            inner.clone().prop_map(|a| Type::record("gpoint", vec![a])),
            Just(Type::record("point", vec![])),
        ]
    })
}

/// Types whose polytypes bind variables 20 and 21 and may also mention
/// the free variables 0..4.
fn any_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![
        (0u32..4).prop_map(|i| Type::var(TyVar(i))),
        prop::sample::select(BINDERS.to_vec()).prop_map(|i| Type::var(TyVar(i))),
        Just(Type::int()),
        Just(Type::bool()),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::arrow(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::Tuple(vec![a, b])),
            (prop::sample::subsequence(BINDERS.to_vec(), 1..=2), inner.clone())
                .prop_map(|(vs, body)| Type::poly(vs.into_iter().map(TyVar).collect(), body)),
        ]
    })
    .prop_map(|t| close_binders(&t))
}

/// Makes stray occurrences of binder names free-variable occurrences.
fn close_binders(t: &Type) -> Type {
    let map: HashMap<TyVar, Type> = BINDERS.iter().map(|&b| (TyVar(b), Type::var(TyVar(b - 20)))).collect();
    t.subst(&map)
}

/// Reference Robinson unification over monotypes.
fn robinson(a: &Type, b: &Type, s: &mut HashMap<TyVar, Type>) -> bool {
    fn walk(t: &Type, s: &HashMap<TyVar, Type>) -> Type {
        match t {
            Type::Var(v) => s.get(v).map_or_else(|| t.clone(), |u| walk(u, s)),
            _ => t.clone(),
        }
    }
    fn full(t: &Type, s: &HashMap<TyVar, Type>) -> Type {
        match walk(t, s) {
            Type::Arrow(a, b) => Type::arrow(full(&a, s), full(&b, s)),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(|t| full(t, s)).collect()),
            Type::Record(n, ts) => Type::Record(n, ts.iter().map(|t| full(t, s)).collect()),
            t => t,
        }
    }
    match (walk(a, s), walk(b, s)) {
        (Type::Var(x), Type::Var(y)) if x == y => true,
        (Type::Var(x), t) | (t, Type::Var(x)) => {
            if full(&t, s).occurs_free(x) {
                return false;
            }
            s.insert(x, t);
            true
        }
        (Type::Arrow(a1, b1), Type::Arrow(a2, b2)) => robinson(&a1, &a2, s) && robinson(&b1, &b2, s),
        (Type::Tuple(xs), Type::Tuple(ys)) | (Type::Record(_, xs), Type::Record(_, ys))
            if xs.len() == ys.len() =>
        {
            let same_name = match (walk(a, s), walk(b, s)) {
                (Type::Record(n, _), Type::Record(m, _)) => n == m,
                _ => true,
            };
            same_name && xs.iter().zip(&ys).all(|(x, y)| robinson(x, y, s))
        }
        (x, y) => x == y,
    }
}

fn apply_full(t: &Type, s: &HashMap<TyVar, Type>) -> Type {
    let mut cur = t.clone();
    loop {
        let next = cur.subst(s);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shape_round_trip(t in any_type()) {
        if let Some((sh, args)) = decompose(&t) {
            let back = shape_apply(&sh, &args).unwrap();
            prop_assert!(alpha_eq(&back, &t), "{back} vs {t}");
            prop_assert!(sh.holes.iter().all(|h| h.is_canonical()));
        }
    }

    #[test]
    fn shapes_ignore_free_variable_names(t in any_type()) {
        let map: HashMap<TyVar, Type> = (0..4).map(|i| (TyVar(i), Type::var(TyVar(i + 100)))).collect();
        let (a, b) = (decompose(&t), decompose(&t.subst(&map)));
        prop_assert_eq!(a.map(|x| x.0), b.map(|x| x.0));
    }

    #[test]
    fn binder_renaming_preserves_alpha_equivalence(t in any_type()) {
        prop_assert!(alpha_eq(&t, &t.rename_binders_apart()));
    }

    #[test]
    fn normalization_is_idempotent(t in any_type()) {
        let s = Scheme::closing(t);
        prop_assert_eq!(s.normalize(), s.normalize().normalize());
        prop_assert!(s.alpha_eq(&s.normalize()));
    }

    #[test]
    fn unifier_agrees_with_robinson(a in mono(), b in mono()) {
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let (na, nb) = (build(&mut g, &a, &mut vars), build(&mut g, &b, &mut vars));
        let got = g.unify(na, nb);
        let mut s = HashMap::new();
        let want = robinson(&a, &b, &mut s);
        prop_assert_eq!(got.is_ok(), want, "{} = {}: {:?}", a, b, got);
        if want {
            prop_assert!(g.solved_form());
            // Engine variables are node names; compare up to renaming.
            let lhs = Scheme::closing(g.read(na));
            let rhs = Scheme::closing(apply_full(&a, &s));
            prop_assert!(lhs.alpha_eq(&rhs), "{} vs {}", lhs, rhs);
            prop_assert_eq!(g.read(na), g.read(nb));
        }
    }

    #[test]
    fn occurs_check_rejects_cycles(t in mono(), left in any::<bool>()) {
        let v = TyVar(0);
        let t = if left { Type::arrow(Type::var(v), t) } else { Type::Tuple(vec![t, Type::var(v)]) };
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let (nv, nt) = (build(&mut g, &Type::var(v), &mut vars), build(&mut g, &t, &mut vars));
        let r = g.unify(nv, nt);
        prop_assert!(matches!(r, Err(UnifyError::Cycle { .. })), "{:?}", r);
    }

    #[test]
    fn polytypes_unify_iff_alpha_equivalent(a in any_type(), b in any_type()) {
        // Free variables become `int` so that both sides are ground.
        let ground: HashMap<TyVar, Type> = (0..4).map(|i| (TyVar(i), Type::int())).collect();
        let (a, b) = (Type::poly(vec![TyVar(30)], a.subst(&ground)), Type::poly(vec![TyVar(31)], b.subst(&ground)));
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let (na, nr) = (build(&mut g, &a, &mut vars), build(&mut g, &a.rename_binders_apart(), &mut vars));
        prop_assert!(g.unify(na, nr).is_ok());
        let nb = build(&mut g, &b, &mut vars);
        prop_assert_eq!(g.unify(na, nb).is_ok(), alpha_eq(&a, &b));
        prop_assert!(g.solved_form());
    }

    #[test]
    fn printed_terms_parse_back(seed in any::<u64>()) {
        let term = TermGen::new(seed).term(12);
        let printed = print_term(&term);
        let back = parse_program(&format!("{PRELUDE}let t = {printed}")).unwrap();
        let Some(Item::Let(b)) = back.items.last() else { panic!("{printed}") };
        prop_assert_eq!(&b.term, &term, "{}", printed);
        let p = program_for(&term);
        prop_assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn generated_binders_are_fresh(seed in any::<u64>()) {
        let term = TermGen::new(seed).term(12);
        let labels = standard_labels();
        let mut g = Generator::new(&labels, VarSupply::new(), &[]);
        let root = g.fresh();
        let c = g.generate(&term, &Type::var(root)).unwrap();
        let bound = c.bound_vars();
        let distinct: HashSet<TyVar> = bound.iter().copied().collect();
        prop_assert_eq!(distinct.len(), bound.len());
        prop_assert!(!distinct.contains(&root));
        prop_assert!(c.free_vars().iter().all(|v| *v == root));
    }

    /// Dropping every match constraint can only make a constraint easier.
    #[test]
    fn erasure_is_monotone(seed in any::<u64>()) {
        let term = TermGen::new(seed).term(10);
        let labels = standard_labels();
        let bc = binding_constraint("t", &term, &labels, &HashMap::new()).unwrap();
        let oracle = Oracle::new(&labels);
        if oracle.sat(&bc.open).unwrap() {
            prop_assert!(oracle.sat(&bc.open.erase()).unwrap());
        }
    }
}

#[test]
fn corpus_files_print_and_parse_back() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    for entry in std::fs::read_dir(dir).unwrap() {
        let src = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let p = parse_program(&src).unwrap();
        assert!(p.items.iter().any(|i| matches!(i, Item::Let(_))));
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }
}

#[test]
fn empty_label_env_has_no_records() {
    assert_eq!(LabelEnv::new().records().count(), 0);
}
