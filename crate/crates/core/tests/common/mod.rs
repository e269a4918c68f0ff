#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omni_infer::surface::{parse_program, parse_scheme_text, Program, Span, Term, TermKind, TypeExpr};
use omni_infer::types::{decompose, TyVar, Type};
use omni_infer::unify::{Engine, NodeId};

/// Declarations in scope for generated terms.
pub const PRELUDE: &str = "type point = { x : int; y : int }\ntype gray_point = { x : int; y : int; color : int }\n";

pub fn program_for(term: &Term) -> Program {
    let mut p = parse_program(PRELUDE).unwrap();
    let src = format!("{PRELUDE}let t = {}", omni_infer::surface::print_term(term));
    let parsed = parse_program(&src).unwrap_or_else(|e| panic!("generated term does not parse: {e}\n{src}"));
    p.items.push(parsed.items.last().unwrap().clone());
    p
}

fn t(kind: TermKind) -> Term {
    Term::new(kind, Span::default())
}

fn records() -> Vec<(String, usize)> {
    vec![("point".into(), 0), ("gray_point".into(), 0)]
}

/// Closed terms over unit, int, bool, the `point` and `gray_point` records,
/// pairs and boxes of `'a. 'a -> 'a`.
pub struct TermGen {
    rng: ChaCha8Rng,
    next_var: usize,
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), next_var: 0 }
    }

    /// A term with at most `max_size` nodes.
    pub fn term(&mut self, max_size: usize) -> Term {
        self.next_var = 0;
        let size = self.rng.random_range(1..=max_size);
        self.gen(size, &mut Vec::new())
    }

    fn fresh(&mut self) -> String {
        self.next_var += 1;
        format!("x{}", self.next_var)
    }

    fn leaf(&mut self, scope: &[String]) -> Term {
        let k = self.rng.random_range(0..if scope.is_empty() { 3 } else { 6 });
        match k {
            0 => t(TermKind::UnitLit),
            1 => t(TermKind::IntLit(self.rng.random_range(0..3))),
            2 => t(TermKind::BoolLit(self.rng.random())),
            _ => t(TermKind::Var(scope[self.rng.random_range(0..scope.len())].clone())),
        }
    }

    /// Exactly `size` nodes, or fewer when no construct fits.
    fn gen(&mut self, size: usize, scope: &mut Vec<String>) -> Term {
        if size <= 1 {
            return self.leaf(scope);
        }
        loop {
            match self.rng.random_range(0..11) {
                0 => {
                    let x = self.fresh();
                    scope.push(x.clone());
                    let body = self.gen(size - 1, scope);
                    scope.pop();
                    return t(TermKind::Fun(x, Box::new(body)));
                }
                1 => {
                    let l = ["x", "y", "color"][self.rng.random_range(0..3)];
                    return t(TermKind::FieldImplicit(Box::new(self.gen(size - 1, scope)), l.into()));
                }
                2 => {
                    let j = self.rng.random_range(1..=2);
                    return t(TermKind::ProjImplicit(Box::new(self.gen(size - 1, scope)), j));
                }
                3 => return t(TermKind::UnboxImplicit(Box::new(self.gen(size - 1, scope)))),
                4 => {
                    let s = parse_scheme_text("'a. 'a -> 'a", &[]).unwrap();
                    return t(TermKind::BoxExplicit(Box::new(self.gen(size - 1, scope)), vec![], s));
                }
                5 => {
                    let ty = match self.rng.random_range(0..4) {
                        0 => TypeExpr::Named("point".into(), vec![]),
                        1 => TypeExpr::Named("gray_point".into(), vec![]),
                        2 => TypeExpr::Int,
                        _ => parse_scheme_text("['a. 'a -> 'a]", &records()).unwrap().body,
                    };
                    return t(TermKind::Annot(Box::new(self.gen(size - 1, scope)), vec![], ty));
                }
                6 if size >= 3 => {
                    let k = self.rng.random_range(1..size - 1);
                    let f = self.gen(k, scope);
                    let a = self.gen(size - 1 - k, scope);
                    return t(TermKind::App(Box::new(f), Box::new(a)));
                }
                7 if size >= 3 => {
                    let k = self.rng.random_range(1..size - 1);
                    let def = self.gen(k, scope);
                    let x = self.fresh();
                    scope.push(x.clone());
                    let body = self.gen(size - 1 - k, scope);
                    scope.pop();
                    return t(TermKind::Let(x, Box::new(def), Box::new(body)));
                }
                8 if size >= 3 => {
                    let k = self.rng.random_range(1..size - 1);
                    let a = self.gen(k, scope);
                    let b = self.gen(size - 1 - k, scope);
                    return t(TermKind::Tuple(vec![a, b]));
                }
                9 if size >= 3 => {
                    let k = self.rng.random_range(1..size - 1);
                    let a = self.gen(k, scope);
                    let b = self.gen(size - 1 - k, scope);
                    return t(TermKind::Record(vec![("x".into(), a), ("y".into(), b)]));
                }
                10 if size >= 4 => {
                    let k = self.rng.random_range(1..size - 2);
                    let j = self.rng.random_range(1..size - 1 - k);
                    let a = self.gen(k, scope);
                    let b = self.gen(j, scope);
                    let c = self.gen(size - 1 - k - j, scope);
                    return t(TermKind::Record(vec![("x".into(), a), ("y".into(), b), ("color".into(), c)]));
                }
                _ => {}
            }
        }
    }
}

/// Builds `t` into `g` in the root scope; variables are shared through `vars`.
pub fn build(g: &mut Engine, t: &Type, vars: &mut HashMap<TyVar, NodeId>) -> NodeId {
    let root = g.root_scope();
    match t {
        Type::Var(v) => *vars.entry(*v).or_insert_with(|| g.fresh(root)),
        _ => {
            let (sh, args) = decompose(t).unwrap();
            let cs = args.iter().map(|a| build(g, a, vars)).collect();
            g.structure(sh, cs, root).unwrap()
        }
    }
}
