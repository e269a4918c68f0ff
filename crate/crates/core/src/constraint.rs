//! The constraint language: syntax, shape patterns, match discharge, erasure
//! and desugaring of the record and polytype constraint formers.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use crate::surface::Span;
use crate::types::{shape_apply, Label, LabelEnv, RecordName, Scheme, Shape, ShapeKind, TyVar, Type, VarSupply};

/// A pattern meta-variable (record variable ρ or scheme variable ς).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct MetaVar(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub enum RecordRef {
    Meta(MetaVar),
    Name(RecordName),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeRef {
    Meta(MetaVar),
    Scheme(Scheme),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Wildcard,
    /// Matches a tuple of arity at least `j` (1-based), binding the component.
    TupleProj(TyVar, usize),
    RecordPat(MetaVar),
    PolyPat(MetaVar),
}

/// Where a match constraint came from, for error reports.
#[derive(Clone, Debug, PartialEq)]
pub struct Origin {
    pub span: Span,
    pub what: String,
}

impl Origin {
    pub fn new(span: Span, what: impl Into<String>) -> Self {
        Origin { span, what: what.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub scrutinee: Type,
    pub branches: Vec<(Pattern, Constraint)>,
    pub origin: Origin,
}

/// Why a constraint is unsatisfiable, when known syntactically.
#[derive(Clone, Debug, PartialEq)]
pub enum FalseReason {
    Label { label: Label, record: RecordName },
    Domain { record: RecordName, labels: Vec<Label> },
    NoBranch { shape: String, origin: Origin },
    Other(String),
}

impl fmt::Display for FalseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FalseReason::Label { label, record } => write!(f, "record `{record}` has no field `{label}`"),
            FalseReason::Domain { record, labels } => {
                write!(f, "record `{record}` does not have exactly the fields {{{}}}", labels.join("; "))
            }
            FalseReason::NoBranch { shape, origin } => write!(f, "{} cannot apply to type {shape}", origin.what),
            FalseReason::Other(s) => f.write_str(s),
        }
    }
}

/// `Let(x, α, def, body)` binds `x` to the abstraction `λα. def`.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    True,
    False(FalseReason),
    And(Box<Constraint>, Box<Constraint>),
    Exists(Vec<TyVar>, Box<Constraint>),
    Forall(Vec<TyVar>, Box<Constraint>),
    Eq(Type, Type),
    Let(String, TyVar, Box<Constraint>, Box<Constraint>),
    App(String, Type),
    Match(Box<Match>),
    /// `ℓ@ρ ≤ τ₁ → τ₂`
    LabLeq(Label, RecordRef, Type, Type),
    /// `dom ρ = ℓ̄`
    DomEq(RecordRef, Vec<Label>),
    /// `ς ≤ τ`
    SchemeLeq(SchemeRef, Type),
    /// `x ≤ ς`
    AbsLeq(String, SchemeRef),
}

use Constraint as C;

impl Constraint {
    pub fn and(a: Constraint, b: Constraint) -> Constraint {
        match (a, b) {
            (C::True, c) | (c, C::True) => c,
            (a, b) => C::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn conj(cs: impl IntoIterator<Item = Constraint>) -> Constraint {
        cs.into_iter().fold(C::True, Constraint::and)
    }

    pub fn exists(vars: Vec<TyVar>, c: Constraint) -> Constraint {
        if vars.is_empty() {
            c
        } else {
            C::Exists(vars, Box::new(c))
        }
    }

    pub fn forall(vars: Vec<TyVar>, c: Constraint) -> Constraint {
        if vars.is_empty() {
            c
        } else {
            C::Forall(vars, Box::new(c))
        }
    }

    pub fn eq(a: Type, b: Type) -> Constraint {
        C::Eq(a, b)
    }

    pub fn let_(x: impl Into<String>, v: TyVar, def: Constraint, body: Constraint) -> Constraint {
        C::Let(x.into(), v, Box::new(def), Box::new(body))
    }

    pub fn match_(scrutinee: Type, branches: Vec<(Pattern, Constraint)>, origin: Origin) -> Constraint {
        C::Match(Box::new(Match { scrutinee, branches, origin }))
    }

    pub fn children(&self) -> Vec<&Constraint> {
        match self {
            C::And(a, b) | C::Let(_, _, a, b) => vec![a, b],
            C::Exists(_, c) | C::Forall(_, c) => vec![c],
            C::Match(m) => m.branches.iter().map(|(_, c)| c).collect(),
            _ => vec![],
        }
    }

    /// Number of constructor nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Number of `Match` constructors, including those nested in branches.
    pub fn count_matches(&self) -> usize {
        let own = usize::from(matches!(self, C::Match(_)));
        own + self.children().iter().map(|c| c.count_matches()).sum::<usize>()
    }

    /// Number of instantiation constraints, counting `x ≤ ς` as one.
    pub fn count_apps(&self) -> usize {
        let own = usize::from(matches!(self, C::App(..) | C::AbsLeq(..)));
        own + self.children().iter().map(|c| c.count_apps()).sum::<usize>()
    }

    pub fn is_simple(&self) -> bool {
        self.count_matches() == 0
    }

    /// Replaces every match constraint by `True`.
    pub fn erase(&self) -> Constraint {
        match self {
            C::Match(_) => C::True,
            C::And(a, b) => C::And(Box::new(a.erase()), Box::new(b.erase())),
            C::Exists(vs, c) => C::Exists(vs.clone(), Box::new(c.erase())),
            C::Forall(vs, c) => C::Forall(vs.clone(), Box::new(c.erase())),
            C::Let(x, v, d, b) => C::Let(x.clone(), *v, Box::new(d.erase()), Box::new(b.erase())),
            other => other.clone(),
        }
    }

    /// Type variables occurring free.
    pub fn free_vars(&self) -> BTreeSet<TyVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<TyVar>, out: &mut BTreeSet<TyVar>) {
        let add = |t: &Type, bound: &Vec<TyVar>, out: &mut BTreeSet<TyVar>| {
            for v in t.free_vars() {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match self {
            C::True | C::False(_) | C::DomEq(..) => {}
            C::And(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            C::Exists(vs, c) | C::Forall(vs, c) => {
                let n = bound.len();
                bound.extend(vs);
                c.collect_free(bound, out);
                bound.truncate(n);
            }
            C::Eq(a, b) | C::LabLeq(_, _, a, b) => {
                add(a, bound, out);
                add(b, bound, out);
            }
            C::Let(_, v, d, b) => {
                bound.push(*v);
                d.collect_free(bound, out);
                bound.pop();
                b.collect_free(bound, out);
            }
            C::App(_, t) => add(t, bound, out),
            C::Match(m) => {
                add(&m.scrutinee, bound, out);
                for (p, c) in &m.branches {
                    let n = bound.len();
                    if let Pattern::TupleProj(b, _) = p {
                        bound.push(*b);
                    }
                    c.collect_free(bound, out);
                    bound.truncate(n);
                }
            }
            C::SchemeLeq(s, t) => {
                if let SchemeRef::Scheme(s) = s {
                    add(&Type::Poly(Box::new(s.clone())), bound, out);
                }
                add(t, bound, out);
            }
            C::AbsLeq(_, s) => {
                if let SchemeRef::Scheme(s) = s {
                    add(&Type::Poly(Box::new(s.clone())), bound, out);
                }
            }
        }
    }

    /// Every type variable bound by `∃`, `∀`, `Let` or a tuple pattern.
    pub fn bound_vars(&self) -> Vec<TyVar> {
        let mut out = Vec::new();
        self.collect_bound(&mut out);
        out
    }

    fn collect_bound(&self, out: &mut Vec<TyVar>) {
        match self {
            C::Exists(vs, _) | C::Forall(vs, _) => out.extend(vs),
            C::Let(_, v, _, _) => out.push(*v),
            C::Match(m) => {
                for (p, _) in &m.branches {
                    if let Pattern::TupleProj(b, _) = p {
                        out.push(*b);
                    }
                }
            }
            _ => {}
        }
        for c in self.children() {
            c.collect_bound(out);
        }
    }

    /// Largest supply variable mentioned anywhere, used to start a supply
    /// that cannot collide with the constraint.
    pub fn max_var(&self) -> Option<TyVar> {
        let mut vs = self.bound_vars();
        vs.extend(self.free_vars());
        self.collect_type_vars(&mut vs);
        vs.into_iter().filter(|v| !v.is_canonical() && v.0 < 0x8000_0000).max()
    }

    fn collect_type_vars(&self, out: &mut Vec<TyVar>) {
        let types: Vec<&Type> = match self {
            C::Eq(a, b) | C::LabLeq(_, _, a, b) => vec![a, b],
            C::App(_, t) => vec![t],
            C::SchemeLeq(_, t) => vec![t],
            C::Match(m) => vec![&m.scrutinee],
            _ => vec![],
        };
        for t in types {
            out.extend(t.free_vars());
        }
        for c in self.children() {
            c.collect_type_vars(out);
        }
    }

    fn map_meta(&self, f: &dyn Fn(&Constraint) -> Option<Constraint>) -> Constraint {
        if let Some(c) = f(self) {
            return c;
        }
        match self {
            C::And(a, b) => C::And(Box::new(a.map_meta(f)), Box::new(b.map_meta(f))),
            C::Exists(vs, c) => C::Exists(vs.clone(), Box::new(c.map_meta(f))),
            C::Forall(vs, c) => C::Forall(vs.clone(), Box::new(c.map_meta(f))),
            C::Let(x, v, d, b) => C::Let(x.clone(), *v, Box::new(d.map_meta(f)), Box::new(b.map_meta(f))),
            C::Match(m) => C::Match(Box::new(Match {
                scrutinee: m.scrutinee.clone(),
                branches: m.branches.iter().map(|(p, c)| (p.clone(), c.map_meta(f))).collect(),
                origin: m.origin.clone(),
            })),
            other => other.clone(),
        }
    }

    /// Applies a type substitution to free occurrences. Bound variables are
    /// assumed distinct from the substitution's domain and range, which holds
    /// for generated constraints since all binders are fresh.
    pub fn subst(&self, map: &HashMap<TyVar, Type>) -> Constraint {
        let st = |t: &Type| t.subst(map);
        let ss = |s: &SchemeRef| match s {
            SchemeRef::Scheme(s) => match Type::Poly(Box::new(s.clone())).subst(map) {
                Type::Poly(s) => SchemeRef::Scheme(*s),
                _ => unreachable!(),
            },
            m => m.clone(),
        };
        match self {
            C::True | C::False(_) | C::DomEq(..) => self.clone(),
            C::And(a, b) => C::And(Box::new(a.subst(map)), Box::new(b.subst(map))),
            C::Exists(vs, c) => C::Exists(vs.clone(), Box::new(c.subst(map))),
            C::Forall(vs, c) => C::Forall(vs.clone(), Box::new(c.subst(map))),
            C::Eq(a, b) => C::Eq(st(a), st(b)),
            C::Let(x, v, d, b) => C::Let(x.clone(), *v, Box::new(d.subst(map)), Box::new(b.subst(map))),
            C::App(x, t) => C::App(x.clone(), st(t)),
            C::Match(m) => C::Match(Box::new(Match {
                scrutinee: st(&m.scrutinee),
                branches: m.branches.iter().map(|(p, c)| (p.clone(), c.subst(map))).collect(),
                origin: m.origin.clone(),
            })),
            C::LabLeq(l, r, a, b) => C::LabLeq(l.clone(), r.clone(), st(a), st(b)),
            C::SchemeLeq(s, t) => C::SchemeLeq(ss(s), st(t)),
            C::AbsLeq(x, s) => C::AbsLeq(x.clone(), ss(s)),
        }
    }
}

/// Result of matching a pattern against a shape.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaSubst {
    pub types: Vec<(TyVar, Type)>,
    pub records: Vec<(MetaVar, RecordName)>,
    pub schemes: Vec<(MetaVar, Scheme)>,
}

impl MetaSubst {
    fn empty() -> Self {
        MetaSubst { types: Vec::new(), records: Vec::new(), schemes: Vec::new() }
    }

    pub fn apply(&self, c: &Constraint) -> Constraint {
        let types: HashMap<TyVar, Type> = self.types.iter().cloned().collect();
        let c = if types.is_empty() { c.clone() } else { c.subst(&types) };
        if self.records.is_empty() && self.schemes.is_empty() {
            return c;
        }
        let rec = |r: &RecordRef| match r {
            RecordRef::Meta(m) => match self.records.iter().find(|(k, _)| k == m) {
                Some((_, n)) => RecordRef::Name(n.clone()),
                None => r.clone(),
            },
            _ => r.clone(),
        };
        let sch = |s: &SchemeRef| match s {
            SchemeRef::Meta(m) => match self.schemes.iter().find(|(k, _)| k == m) {
                Some((_, s)) => SchemeRef::Scheme(s.clone()),
                None => s.clone(),
            },
            _ => s.clone(),
        };
        c.map_meta(&|c| match c {
            C::LabLeq(l, r, a, b) => Some(C::LabLeq(l.clone(), rec(r), a.clone(), b.clone())),
            C::DomEq(r, ls) => Some(C::DomEq(rec(r), ls.clone())),
            C::SchemeLeq(s, t) => Some(C::SchemeLeq(sch(s), t.clone())),
            C::AbsLeq(x, s) => Some(C::AbsLeq(x.clone(), sch(s))),
            _ => None,
        })
    }
}

/// Matches `p` against the canonical shape `sh`, with `fresh` naming the
/// shape's holes.
pub fn match_pattern(p: &Pattern, sh: &Shape, fresh: &[TyVar]) -> Option<MetaSubst> {
    assert_eq!(fresh.len(), sh.arity(), "one fresh variable per hole");
    let mut s = MetaSubst::empty();
    match (p, sh.kind(), &sh.body) {
        (Pattern::Wildcard, ShapeKind::Trivial, _) => return None,
        (Pattern::Wildcard, _, _) => {}
        (Pattern::TupleProj(b, j), ShapeKind::Tuple(n), _) if *j >= 1 && *j <= n => {
            s.types.push((*b, Type::Var(fresh[j - 1])));
        }
        (Pattern::RecordPat(r), ShapeKind::Record, Type::Record(name, _)) => s.records.push((*r, name.clone())),
        (Pattern::PolyPat(m), ShapeKind::Poly, _) => {
            let args: Vec<Type> = fresh.iter().map(|v| Type::Var(*v)).collect();
            match shape_apply(sh, &args).ok()? {
                Type::Poly(scheme) => s.schemes.push((*m, *scheme)),
                _ => unreachable!("poly shape applies to a polytype"),
            }
        }
        _ => return None,
    }
    Some(s)
}

/// The constraint a match reduces to once its scrutinee has shape `sh`:
/// `∃γ̄. τ = sh⟨γ̄⟩ ∧ θ(c)` for the matching branch, `False` if none matches.
/// Substituted record and scheme formers are desugared.
pub fn discharge(m: &Match, sh: &Shape, labels: &LabelEnv, supply: &mut VarSupply) -> Constraint {
    let fresh = supply.fresh_vec(sh.arity());
    for (p, c) in &m.branches {
        if let Some(theta) = match_pattern(p, sh, &fresh) {
            let args: Vec<Type> = fresh.iter().map(|v| Type::Var(*v)).collect();
            let head = shape_apply(sh, &args).expect("arity matches");
            let body = desugar(&theta.apply(c), labels, supply);
            return C::exists(fresh, C::and(C::Eq(m.scrutinee.clone(), head), body));
        }
    }
    C::False(FalseReason::NoBranch { shape: sh.describe(), origin: m.origin.clone() })
}

/// Expands substituted `LabLeq`, `DomEq`, `SchemeLeq` and `AbsLeq` formers
/// into core constraints; formers under an unsubstituted meta-variable and
/// the contents of match branches are left alone.
pub fn desugar(c: &Constraint, labels: &LabelEnv, supply: &mut VarSupply) -> Constraint {
    match c {
        C::And(a, b) => C::And(Box::new(desugar(a, labels, supply)), Box::new(desugar(b, labels, supply))),
        C::Exists(vs, c) => C::Exists(vs.clone(), Box::new(desugar(c, labels, supply))),
        C::Forall(vs, c) => C::Forall(vs.clone(), Box::new(desugar(c, labels, supply))),
        C::Let(x, v, d, b) => C::Let(
            x.clone(),
            *v,
            Box::new(desugar(d, labels, supply)),
            Box::new(desugar(b, labels, supply)),
        ),
        C::LabLeq(l, RecordRef::Name(r), a, b) => match labels.projection(l, r) {
            None => C::False(FalseReason::Label { label: l.clone(), record: r.clone() }),
            Some(s) => {
                let fresh = supply.fresh_vec(s.vars.len());
                let map = s.vars.iter().copied().zip(fresh.iter().map(|v| Type::Var(*v))).collect();
                match s.body.subst(&map) {
                    Type::Arrow(head, field) => {
                        C::exists(fresh, C::and(C::Eq(a.clone(), *head), C::Eq(b.clone(), *field)))
                    }
                    _ => unreachable!("projection schemes are arrows"),
                }
            }
        },
        C::DomEq(RecordRef::Name(r), ls) => {
            let want: BTreeSet<Label> = ls.iter().cloned().collect();
            if labels.domain(r).as_ref() == Some(&want) {
                C::True
            } else {
                C::False(FalseReason::Domain { record: r.clone(), labels: ls.clone() })
            }
        }
        C::SchemeLeq(SchemeRef::Scheme(s), t) => {
            let (fresh, body) = freshen(s, supply);
            C::exists(fresh, C::Eq(body, t.clone()))
        }
        C::AbsLeq(x, SchemeRef::Scheme(s)) => {
            let (fresh, body) = freshen(s, supply);
            C::forall(fresh, C::App(x.clone(), body))
        }
        other => other.clone(),
    }
}

fn freshen(s: &Scheme, supply: &mut VarSupply) -> (Vec<TyVar>, Type) {
    let fresh = supply.fresh_vec(s.vars.len());
    let map = s.vars.iter().copied().zip(fresh.iter().map(|v| Type::Var(*v))).collect();
    (fresh, s.body.subst(&map))
}

/// Debug rendering with `∃ ∀ ∧ ▷ ⩽`; variables print as `α12`.
pub fn show_constraint(c: &Constraint) -> String {
    let mut out = String::new();
    write_constraint(c, &mut out);
    out
}

fn tv(v: TyVar) -> String {
    format!("α{}", v.0)
}

fn ty(t: &Type) -> String {
    let mut namer = crate::types::Namer::new();
    for v in t.free_vars() {
        namer.assign(v, tv(v));
    }
    let mut out = String::new();
    crate::types::write_type(t, 0, &mut namer, &mut out);
    out
}

fn scheme_ref(s: &SchemeRef) -> String {
    match s {
        SchemeRef::Meta(m) => format!("ς{}", m.0),
        SchemeRef::Scheme(s) => ty(&Type::Poly(Box::new(s.clone()))),
    }
}

fn record_ref(r: &RecordRef) -> String {
    match r {
        RecordRef::Meta(m) => format!("ρ{}", m.0),
        RecordRef::Name(n) => n.clone(),
    }
}

fn vars(vs: &[TyVar]) -> String {
    vs.iter().map(|v| tv(*v)).collect::<Vec<_>>().join(" ")
}

fn write_constraint(c: &Constraint, out: &mut String) {
    match c {
        C::True => out.push_str("true"),
        C::False(r) => {
            let _ = write!(out, "false[{r}]");
        }
        C::And(a, b) => {
            out.push('(');
            write_constraint(a, out);
            out.push_str(" ∧ ");
            write_constraint(b, out);
            out.push(')');
        }
        C::Exists(vs, c) => {
            let _ = write!(out, "∃{}. ", vars(vs));
            write_constraint(c, out);
        }
        C::Forall(vs, c) => {
            let _ = write!(out, "∀{}. ", vars(vs));
            write_constraint(c, out);
        }
        C::Eq(a, b) => {
            let _ = write!(out, "{} = {}", ty(a), ty(b));
        }
        C::Let(x, v, d, b) => {
            let _ = write!(out, "let {x} = λ{}. ", tv(*v));
            write_constraint(d, out);
            out.push_str(" in ");
            write_constraint(b, out);
        }
        C::App(x, t) => {
            let _ = write!(out, "{x} ⩽ {}", ty(t));
        }
        C::Match(m) => {
            let _ = write!(out, "match {} with [", ty(&m.scrutinee));
            for (i, (p, c)) in m.branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                let pat = match p {
                    Pattern::Wildcard => "_".to_string(),
                    Pattern::TupleProj(b, j) => format!("Π({}/{j})", tv(*b)),
                    Pattern::RecordPat(r) => format!("ρ{} _", r.0),
                    Pattern::PolyPat(s) => format!("[ς{}]", s.0),
                };
                let _ = write!(out, "{pat} ▷ ");
                write_constraint(c, out);
            }
            out.push(']');
        }
        C::LabLeq(l, r, a, b) => {
            let _ = write!(out, "{l}@{} ⩽ {} → {}", record_ref(r), ty(a), ty(b));
        }
        C::DomEq(r, ls) => {
            let _ = write!(out, "dom {} = {{{}}}", record_ref(r), ls.join(", "));
        }
        C::SchemeLeq(s, t) => {
            let _ = write!(out, "{} ⩽ {}", scheme_ref(s), ty(t));
        }
        C::AbsLeq(x, s) => {
            let _ = write!(out, "{x} ⩽ {}", scheme_ref(s));
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&show_constraint(self))
    }
}
