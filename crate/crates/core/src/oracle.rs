//! A semantic satisfiability checker used as ground truth in tests.
//!
//! It shares nothing with the solver beyond the constraint syntax, shapes and
//! type utilities. Let-abstractions are inlined: every instantiation and one
//! extra non-emptiness witness get their own copy of the definition, and all
//! copies of a syntactic match are discharged together with one shape.
//!
//! A match may be discharged with shape `s` when `s` is the only shape its
//! scrutinee can take over all solutions of the erased constraint, where the
//! scrutinees of all copies are tied to one shared ground type. Simple
//! constraints are decided by most general unification, which is exact over
//! the infinite set of ground types. When the tied constraint has no solution
//! the condition holds vacuously for every shape, and each candidate shape is
//! tried in turn. Matches are discharged in every order (up to revisiting the
//! same set of decisions) and the constraint holds if some order reaches a
//! satisfiable simple constraint.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use crate::constraint::{match_pattern, Constraint, Match, MetaVar, RecordRef, SchemeRef};
use crate::types::{decompose, is_instance, shape_apply, LabelEnv, RecordDecl, Scheme, Shape, TyVar, Type, VarSupply};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle budget exceeded: {0}")]
    Budget(String),
}

/// A finite, subterm-closed set of ground types.
#[derive(Clone, Debug)]
pub struct GroundUniverse {
    types: Vec<Type>,
}

/// The two polytypes every universe contains.
pub fn standard_polys() -> Vec<Type> {
    let a = TyVar::canonical(0);
    vec![
        Type::poly(vec![a], Type::arrow(Type::var(a), Type::var(a))),
        Type::poly(vec![a], Type::arrow(Type::var(a), Type::arrow(Type::var(a), Type::var(a)))),
    ]
}

/// Record declarations used by the randomized suites: `point`, `gray_point`
/// and the parametric `'a gpoint`.
pub fn standard_labels() -> LabelEnv {
    let mut env = LabelEnv::new();
    let xy = |t: Type| vec![("x".to_string(), t.clone()), ("y".to_string(), t)];
    env.declare(RecordDecl { name: "point".into(), params: vec![], fields: xy(Type::int()) }).unwrap();
    let mut gray = xy(Type::int());
    gray.push(("color".to_string(), Type::int()));
    env.declare(RecordDecl { name: "gray_point".into(), params: vec![], fields: gray }).unwrap();
    let a = TyVar(0);
    env.declare(RecordDecl { name: "gpoint".into(), params: vec![a], fields: xy(Type::var(a)) }).unwrap();
    env
}

impl GroundUniverse {
    /// The universe over [`standard_labels`].
    pub fn standard(depth: usize) -> Self {
        Self::for_labels(&standard_labels(), depth)
    }

    /// Atoms are `unit`, `int`, `bool`, `float`, every declared record with
    /// all parameters set to `int` or to `bool`, and the standard polytypes.
    /// Each further level adds arrows and pairs over the previous one.
    pub fn for_labels(labels: &LabelEnv, depth: usize) -> Self {
        let mut atoms = vec![Type::Unit, Type::int(), Type::bool(), Type::float()];
        for d in labels.records() {
            if d.params.is_empty() {
                atoms.push(Type::record(&d.name, vec![]));
            } else {
                for b in [Type::int(), Type::bool()] {
                    atoms.push(Type::record(&d.name, vec![b; d.params.len()]));
                }
            }
        }
        atoms.extend(standard_polys());
        let mut types = atoms;
        for _ in 1..depth {
            let prev = types.clone();
            for a in &prev {
                for b in &prev {
                    types.push(Type::arrow(a.clone(), b.clone()));
                    types.push(Type::Tuple(vec![a.clone(), b.clone()]));
                }
            }
            let mut seen = HashSet::new();
            types.retain(|t| seen.insert(t.clone()));
        }
        GroundUniverse { types }
    }

    pub fn types(&self) -> &[Type] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Distinct canonical shapes of members and their subterms.
    pub fn shapes(&self) -> Vec<Shape> {
        let mut out: Vec<Shape> = Vec::new();
        for t in &self.types {
            if let Some((sh, _)) = decompose(t) {
                if !out.contains(&sh) {
                    out.push(sh);
                }
            }
        }
        out
    }

    /// Unicity over a finite universe is only meaningful when each category
    /// offers a choice: at least two base, record and polytype shapes.
    pub fn check_diversity(&self) -> Result<(), String> {
        let shapes = self.shapes();
        let count = |f: &dyn Fn(&Type) -> bool| shapes.iter().filter(|s| f(&s.body)).count();
        let base = count(&|t| matches!(t, Type::Unit | Type::Base(_)));
        let records = count(&|t| matches!(t, Type::Record(..)));
        let polys = count(&|t| matches!(t, Type::Poly(_)));
        if base < 2 || records < 2 || polys < 2 {
            return Err(format!("universe has {base} base, {records} record and {polys} polytype shapes"));
        }
        Ok(())
    }
}

/// Result of analysing a constraint with a distinguished free variable.
#[derive(Clone, Debug, Default)]
pub struct Analysis {
    /// The most general type of the root, one per successful discharge path.
    pub leaves: Vec<Type>,
}

impl Analysis {
    pub fn typable(&self) -> bool {
        !self.leaves.is_empty()
    }

    /// Members of `u` some successful path admits for the root.
    pub fn ground_typings(&self, u: &GroundUniverse) -> Vec<Type> {
        let schemes: Vec<Scheme> = self.leaves.iter().map(|t| Scheme::new(t.free_vars(), t.clone())).collect();
        u.types().iter().filter(|g| schemes.iter().any(|s| is_instance(s, g))).cloned().collect()
    }
}

pub struct Oracle<'l> {
    labels: &'l LabelEnv,
    /// Bound on constraint nodes built while inlining and discharging.
    pub max_nodes: usize,
    /// Bound on discharge states visited.
    pub max_states: usize,
}

impl<'l> Oracle<'l> {
    pub fn new(labels: &'l LabelEnv) -> Self {
        Oracle { labels, max_nodes: 200_000, max_states: 2_000 }
    }

    pub fn sat(&self, c: &Constraint) -> Result<bool, OracleError> {
        let mut run = Run::new(self, c);
        let oc = run.expand_top(c)?;
        run.search(oc, None, false)
    }

    /// Explores every discharge path, recording the root's type on each
    /// successful one.
    pub fn analyze(&self, c: &Constraint, root: TyVar) -> Result<Analysis, OracleError> {
        let mut run = Run::new(self, c);
        let oc = run.expand_top(c)?;
        let mut leaves = Vec::new();
        run.search(oc, Some((root, &mut leaves)), true)?;
        Ok(Analysis { leaves })
    }
}

#[derive(Clone, Debug)]
enum MetaVal {
    Record(String),
    Scheme(Scheme),
}

enum LetEnv<'c> {
    Nil,
    Cons(&'c str, Rc<Closure<'c>>, Rc<LetEnv<'c>>),
}

struct Closure<'c> {
    param: TyVar,
    def: &'c Constraint,
    ctx: Ctx<'c>,
}

/// How original variables and meta-variables read in one copy.
#[derive(Clone)]
struct Ctx<'c> {
    ren: Rc<HashMap<TyVar, Type>>,
    metas: Rc<HashMap<MetaVar, MetaVal>>,
    env: Rc<LetEnv<'c>>,
}

impl<'c> Ctx<'c> {
    fn with_vars(&self, pairs: impl IntoIterator<Item = (TyVar, Type)>) -> Ctx<'c> {
        let mut ren = (*self.ren).clone();
        ren.extend(pairs);
        Ctx { ren: Rc::new(ren), ..self.clone() }
    }

    fn lookup(&self, x: &str) -> Option<Rc<Closure<'c>>> {
        let mut cur = &self.env;
        loop {
            match &**cur {
                LetEnv::Nil => return None,
                LetEnv::Cons(y, c, next) => {
                    if *y == x {
                        return Some(c.clone());
                    }
                    cur = next;
                }
            }
        }
    }
}

/// A copy of a syntactic match; copies share `id`.
struct MatchCopy<'c> {
    id: usize,
    m: &'c Match,
    scrutinee: Type,
    ctx: Ctx<'c>,
}

/// Let-free constraints.
#[derive(Clone)]
enum Oc<'c> {
    True,
    False,
    And(Vec<Oc<'c>>),
    Exists(Vec<TyVar>, Box<Oc<'c>>),
    Forall(Vec<TyVar>, Box<Oc<'c>>),
    Eq(Type, Type),
    Match(Rc<MatchCopy<'c>>),
}

enum Unicity {
    Unique(Shape),
    /// No solution once scrutinee copies are tied together.
    Vacuous,
    Multiple,
}

struct Run<'o, 'l> {
    oracle: &'o Oracle<'l>,
    supply: VarSupply,
    nodes: usize,
    states: usize,
    visited: HashSet<BTreeSet<(usize, String)>>,
    /// Shapes to try when unicity holds vacuously.
    candidates: Vec<Shape>,
}

impl<'o, 'l> Run<'o, 'l> {
    fn new(oracle: &'o Oracle<'l>, c: &Constraint) -> Self {
        let mut candidates = GroundUniverse::for_labels(oracle.labels, 1).shapes();
        let a = TyVar::canonical(0);
        let b = TyVar::canonical(1);
        candidates.push(Shape { holes: vec![a, b], body: Type::arrow(Type::var(a), Type::var(b)) });
        for n in 2..=4 {
            let hs: Vec<TyVar> = (0..n).map(TyVar::canonical).collect();
            candidates.push(Shape { holes: hs.clone(), body: Type::Tuple(hs.into_iter().map(Type::var).collect()) });
        }
        let mut polys = Vec::new();
        collect_polys(c, &mut polys);
        for p in polys {
            if let Some((sh, _)) = decompose(&p) {
                if !candidates.contains(&sh) {
                    candidates.push(sh);
                }
            }
        }
        Run {
            oracle,
            supply: VarSupply::starting_after(c.max_var()),
            nodes: 0,
            states: 0,
            visited: HashSet::new(),
            candidates,
        }
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.oracle.max_nodes {
            return Err(OracleError::Budget(format!("more than {} constraint nodes", self.oracle.max_nodes)));
        }
        Ok(())
    }

    fn fresh(&mut self, n: usize) -> Vec<TyVar> {
        self.supply.fresh_vec(n)
    }

    fn expand_top<'c>(&mut self, c: &'c Constraint) -> Result<Oc<'c>, OracleError> {
        let ctx = Ctx { ren: Rc::new(HashMap::new()), metas: Rc::new(HashMap::new()), env: Rc::new(LetEnv::Nil) };
        self.expand(c, &ctx)
    }

    fn expand<'c>(&mut self, c: &'c Constraint, ctx: &Ctx<'c>) -> Result<Oc<'c>, OracleError> {
        self.tick()?;
        let ty = |t: &Type| t.subst(&ctx.ren);
        Ok(match c {
            Constraint::True => Oc::True,
            Constraint::False(_) => Oc::False,
            Constraint::And(a, b) => Oc::And(vec![self.expand(a, ctx)?, self.expand(b, ctx)?]),
            Constraint::Exists(vs, body) | Constraint::Forall(vs, body) => {
                let fresh = self.fresh(vs.len());
                let inner = ctx.with_vars(vs.iter().copied().zip(fresh.iter().map(|v| Type::var(*v))));
                let body = Box::new(self.expand(body, &inner)?);
                match c {
                    Constraint::Exists(..) => Oc::Exists(fresh, body),
                    _ => Oc::Forall(fresh, body),
                }
            }
            Constraint::Eq(a, b) => Oc::Eq(ty(a), ty(b)),
            Constraint::Let(x, v, def, body) => {
                let clo = Rc::new(Closure { param: *v, def, ctx: ctx.clone() });
                let w = self.fresh(1)[0];
                let witness = Oc::Exists(vec![w], Box::new(self.instantiate(&clo, Type::var(w))?));
                let inner = Ctx { env: Rc::new(LetEnv::Cons(x, clo, ctx.env.clone())), ..ctx.clone() };
                Oc::And(vec![witness, self.expand(body, &inner)?])
            }
            Constraint::App(x, t) => match ctx.lookup(x) {
                Some(clo) => self.instantiate(&clo, ty(t))?,
                None => Oc::False,
            },
            Constraint::Match(m) => Oc::Match(Rc::new(MatchCopy {
                id: &**m as *const Match as usize,
                m,
                scrutinee: ty(&m.scrutinee),
                ctx: ctx.clone(),
            })),
            Constraint::LabLeq(l, r, a, b) => {
                let Some(record) = self.record(r, ctx) else { return Ok(Oc::False) };
                match self.oracle.labels.projection(l, &record) {
                    None => Oc::False,
                    Some(s) => match self.freshen(&s) {
                        (fresh, Type::Arrow(head, field)) => Oc::Exists(
                            fresh,
                            Box::new(Oc::And(vec![Oc::Eq(ty(a), *head), Oc::Eq(ty(b), *field)])),
                        ),
                        _ => unreachable!("projections are arrows"),
                    },
                }
            }
            Constraint::DomEq(r, ls) => {
                let want: BTreeSet<String> = ls.iter().cloned().collect();
                match self.record(r, ctx) {
                    Some(rec) if self.oracle.labels.domain(&rec) == Some(want) => Oc::True,
                    _ => Oc::False,
                }
            }
            Constraint::SchemeLeq(s, t) => {
                let Some(s) = self.scheme(s, ctx) else { return Ok(Oc::False) };
                let (fresh, body) = self.freshen(&s);
                Oc::Exists(fresh, Box::new(Oc::Eq(body, ty(t))))
            }
            Constraint::AbsLeq(x, s) => {
                let Some(s) = self.scheme(s, ctx) else { return Ok(Oc::False) };
                let (fresh, body) = self.freshen(&s);
                let inner = match ctx.lookup(x) {
                    Some(clo) => self.instantiate(&clo, body)?,
                    None => Oc::False,
                };
                Oc::Forall(fresh, Box::new(inner))
            }
        })
    }

    fn instantiate<'c>(&mut self, clo: &Closure<'c>, t: Type) -> Result<Oc<'c>, OracleError> {
        let ctx = clo.ctx.with_vars([(clo.param, t)]);
        self.expand(clo.def, &ctx)
    }

    fn record(&self, r: &RecordRef, ctx: &Ctx) -> Option<String> {
        match r {
            RecordRef::Name(n) => Some(n.clone()),
            RecordRef::Meta(m) => match ctx.metas.get(m) {
                Some(MetaVal::Record(n)) => Some(n.clone()),
                _ => None,
            },
        }
    }

    fn scheme(&self, s: &SchemeRef, ctx: &Ctx) -> Option<Scheme> {
        match s {
            SchemeRef::Scheme(s) => match Type::Poly(Box::new(s.clone())).subst(&ctx.ren) {
                Type::Poly(s) => Some(*s),
                _ => unreachable!(),
            },
            SchemeRef::Meta(m) => match ctx.metas.get(m) {
                Some(MetaVal::Scheme(s)) => Some(s.clone()),
                _ => None,
            },
        }
    }

    fn freshen(&mut self, s: &Scheme) -> (Vec<TyVar>, Type) {
        let fresh = self.fresh(s.vars.len());
        let map = s.vars.iter().copied().zip(fresh.iter().map(|v| Type::var(*v))).collect();
        (fresh, s.body.subst(&map))
    }

    /// Replaces every copy of match `id` by its branch for `sh`.
    fn discharge<'c>(&mut self, oc: &Oc<'c>, id: usize, sh: &Shape) -> Result<Oc<'c>, OracleError> {
        Ok(match oc {
            Oc::And(cs) => Oc::And(cs.iter().map(|c| self.discharge(c, id, sh)).collect::<Result<_, _>>()?),
            Oc::Exists(vs, c) => Oc::Exists(vs.clone(), Box::new(self.discharge(c, id, sh)?)),
            Oc::Forall(vs, c) => Oc::Forall(vs.clone(), Box::new(self.discharge(c, id, sh)?)),
            Oc::Match(mc) if mc.id == id => {
                let fresh = self.fresh(sh.arity());
                let head = shape_apply(sh, &fresh.iter().map(|v| Type::var(*v)).collect::<Vec<_>>()).unwrap();
                let mut out = Oc::False;
                for (p, body) in &mc.m.branches {
                    if let Some(theta) = match_pattern(p, sh, &fresh) {
                        let mut metas = (*mc.ctx.metas).clone();
                        metas.extend(theta.records.iter().map(|(m, r)| (*m, MetaVal::Record(r.clone()))));
                        metas.extend(theta.schemes.iter().map(|(m, s)| (*m, MetaVal::Scheme(s.clone()))));
                        let ctx = Ctx { metas: Rc::new(metas), ..mc.ctx.with_vars(theta.types.iter().cloned()) };
                        let body = self.expand(body, &ctx)?;
                        out = Oc::Exists(fresh, Box::new(Oc::And(vec![Oc::Eq(mc.scrutinee.clone(), head), body])));
                        break;
                    }
                }
                out
            }
            other => other.clone(),
        })
    }

    fn search(
        &mut self,
        oc: Oc<'_>,
        mut leaves: Option<(TyVar, &mut Vec<Type>)>,
        all: bool,
    ) -> Result<bool, OracleError> {
        self.search_from(oc, BTreeSet::new(), &mut leaves, all)
    }

    fn search_from(
        &mut self,
        oc: Oc<'_>,
        decisions: BTreeSet<(usize, String)>,
        leaves: &mut Option<(TyVar, &mut Vec<Type>)>,
        all: bool,
    ) -> Result<bool, OracleError> {
        if !self.visited.insert(decisions.clone()) {
            return Ok(false);
        }
        self.states += 1;
        if self.states > self.oracle.max_states {
            return Err(OracleError::Budget(format!("more than {} discharge states", self.oracle.max_states)));
        }
        let mut ids = Vec::new();
        active_matches(&oc, &mut ids);
        if ids.is_empty() {
            let mut u = Unifier::default();
            if !u.solve(&oc, None) {
                return Ok(false);
            }
            if let Some((root, out)) = leaves {
                let t = u.zonk(&Type::var(*root));
                if !out.iter().any(|l| crate::types::alpha_eq(l, &t)) {
                    out.push(t);
                }
            }
            return Ok(true);
        }
        if !Unifier::default().solve(&oc, None) {
            return Ok(false);
        }
        let mut found = false;
        for id in ids {
            let choices = match self.unicity(&oc, id) {
                Unicity::Unique(sh) => vec![sh],
                Unicity::Vacuous => self.candidates.clone(),
                Unicity::Multiple => continue,
            };
            for sh in choices {
                let next = self.discharge(&oc, id, &sh)?;
                let mut d = decisions.clone();
                d.insert((id, format!("{:?}", sh)));
                if self.search_from(next, d, leaves, all)? {
                    found = true;
                    if !all {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(found)
    }

    fn unicity(&mut self, oc: &Oc<'_>, id: usize) -> Unicity {
        let omega = self.fresh(1)[0];
        let mut u = Unifier::default();
        if !u.solve(oc, Some((id, omega))) {
            return Unicity::Vacuous;
        }
        match u.zonk(&Type::var(omega)) {
            Type::Var(_) => Unicity::Multiple,
            t => Unicity::Unique(decompose(&t).expect("non-variable").0),
        }
    }
}

fn collect_polys(c: &Constraint, out: &mut Vec<Type>) {
    fn in_type(t: &Type, out: &mut Vec<Type>) {
        match t {
            Type::Poly(s) => {
                out.push(t.clone());
                in_type(&s.body, out);
            }
            Type::Arrow(a, b) => {
                in_type(a, out);
                in_type(b, out);
            }
            Type::Tuple(ts) | Type::Record(_, ts) => ts.iter().for_each(|t| in_type(t, out)),
            _ => {}
        }
    }
    match c {
        Constraint::Eq(a, b) | Constraint::LabLeq(_, _, a, b) => {
            in_type(a, out);
            in_type(b, out);
        }
        Constraint::App(_, t) => in_type(t, out),
        Constraint::SchemeLeq(s, t) => {
            if let SchemeRef::Scheme(s) = s {
                out.push(Type::Poly(Box::new(s.clone())));
            }
            in_type(t, out);
        }
        Constraint::AbsLeq(_, SchemeRef::Scheme(s)) => out.push(Type::Poly(Box::new(s.clone()))),
        Constraint::Match(m) => in_type(&m.scrutinee, out),
        _ => {}
    }
    for child in c.children() {
        collect_polys(child, out);
    }
}

/// Distinct ids of matches not nested in another match's branch.
fn active_matches(oc: &Oc<'_>, out: &mut Vec<usize>) {
    match oc {
        Oc::And(cs) => cs.iter().for_each(|c| active_matches(c, out)),
        Oc::Exists(_, c) | Oc::Forall(_, c) => active_matches(c, out),
        Oc::Match(mc) if !out.contains(&mc.id) => out.push(mc.id),
        _ => {}
    }
}

/// Substitution-based unification with levels: a variable may only be bound
/// to types whose universal variables were in scope when it was introduced.
#[derive(Default)]
struct Unifier {
    subst: HashMap<TyVar, Type>,
    level: HashMap<TyVar, u32>,
    rigid: HashMap<TyVar, u32>,
}

impl Unifier {
    /// Decides the erased constraint. With `tie = Some((id, ω))`, every copy
    /// of match `id` additionally equates its scrutinee with `ω`.
    fn solve(&mut self, oc: &Oc<'_>, tie: Option<(usize, TyVar)>) -> bool {
        self.walk(oc, 0, tie)
    }

    fn walk(&mut self, oc: &Oc<'_>, lvl: u32, tie: Option<(usize, TyVar)>) -> bool {
        match oc {
            Oc::True => true,
            Oc::False => false,
            Oc::And(cs) => cs.iter().all(|c| self.walk(c, lvl, tie)),
            Oc::Exists(vs, c) => {
                for v in vs {
                    self.level.insert(*v, lvl);
                }
                self.walk(c, lvl, tie)
            }
            Oc::Forall(vs, c) => {
                for v in vs {
                    self.rigid.insert(*v, lvl + 1);
                    self.level.insert(*v, lvl + 1);
                }
                self.walk(c, lvl + 1, tie)
            }
            Oc::Eq(a, b) => self.unify(a, b),
            Oc::Match(mc) => match tie {
                Some((id, omega)) if id == mc.id => self.unify(&mc.scrutinee, &Type::var(omega)),
                _ => true,
            },
        }
    }

    fn resolve(&self, t: &Type) -> Type {
        let mut t = t.clone();
        while let Type::Var(v) = &t {
            match self.subst.get(v) {
                Some(next) => t = next.clone(),
                None => break,
            }
        }
        t
    }

    fn zonk(&self, t: &Type) -> Type {
        match self.resolve(t) {
            Type::Var(v) => Type::Var(v),
            Type::Unit => Type::Unit,
            Type::Base(b) => Type::Base(b),
            Type::Arrow(a, b) => Type::arrow(self.zonk(&a), self.zonk(&b)),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(|t| self.zonk(t)).collect()),
            Type::Record(n, ts) => Type::Record(n, ts.iter().map(|t| self.zonk(t)).collect()),
            // Renamed binders lie outside the supply range, hence outside the
            // substitution's domain.
            p @ Type::Poly(_) => match p.rename_binders_apart() {
                Type::Poly(s) => Type::poly(s.vars, self.zonk(&s.body)),
                _ => unreachable!(),
            },
        }
    }

    fn level_of(&self, v: TyVar) -> u32 {
        self.level.get(&v).copied().unwrap_or(0)
    }

    fn unify(&mut self, a: &Type, b: &Type) -> bool {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Type::Var(x), Type::Var(y)) if x == y => true,
            (Type::Var(x), _) if !self.rigid.contains_key(x) => self.bind(*x, &b),
            (_, Type::Var(y)) if !self.rigid.contains_key(y) => self.bind(*y, &a),
            (Type::Var(_), _) | (_, Type::Var(_)) => false,
            _ => {
                let (Some((s1, xs)), Some((s2, ys))) = (decompose(&a), decompose(&b)) else { return false };
                s1 == s2 && xs.iter().zip(&ys).all(|(x, y)| self.unify(x, y))
            }
        }
    }

    fn bind(&mut self, v: TyVar, t: &Type) -> bool {
        let z = self.zonk(t);
        let fv = z.free_vars();
        if fv.contains(&v) {
            return false;
        }
        let lv = self.level_of(v);
        for u in fv {
            if let Some(&r) = self.rigid.get(&u) {
                if r > lv {
                    return false;
                }
            } else if self.level_of(u) > lv {
                self.level.insert(u, lv);
            }
        }
        self.subst.insert(v, z);
        true
    }
}
