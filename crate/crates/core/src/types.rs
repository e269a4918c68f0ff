//! Types, type schemes, shapes and the record label environment.
//!
//! Shapes are kept in canonical form: holes are `TyVar::canonical(0..n)` in
//! first-occurrence order, and binders inside polytype bodies continue the
//! canonical numbering in preorder. Structural equality of canonical shapes is
//! therefore alpha-equivalence.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::atomic::{AtomicU32, Ordering};

use indexmap::IndexMap;
use thiserror::Error;

pub type Label = String;
pub type RecordName = String;

/// A type variable. Supply-generated variables live below `RENAME_BASE`;
/// binder renamings and canonical names use disjoint reserved ranges.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TyVar(pub u32);

const RENAME_BASE: u32 = 0x8000_0000;
const CANONICAL_BASE: u32 = 0xC000_0000;
static RENAME_COUNTER: AtomicU32 = AtomicU32::new(RENAME_BASE);

impl TyVar {
    pub fn canonical(i: usize) -> TyVar {
        TyVar(CANONICAL_BASE + i as u32)
    }

    pub fn is_canonical(self) -> bool {
        self.0 >= CANONICAL_BASE
    }

    /// A binder name distinct from every supply-generated and canonical name.
    fn renamed() -> TyVar {
        let v = RENAME_COUNTER.fetch_add(1, Ordering::Relaxed);
        assert!(v < CANONICAL_BASE, "binder renaming space exhausted");
        TyVar(v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VarSupply {
    next: u32,
}

impl VarSupply {
    pub fn new() -> Self {
        Self::default()
    }

    /// A supply whose variables all exceed `v`.
    pub fn starting_after(v: Option<TyVar>) -> Self {
        VarSupply { next: v.map_or(0, |v| v.0 + 1) }
    }

    pub fn fresh(&mut self) -> TyVar {
        let v = TyVar(self.next);
        self.next += 1;
        assert!(self.next < RENAME_BASE, "type variable supply exhausted");
        v
    }

    pub fn fresh_vec(&mut self, n: usize) -> Vec<TyVar> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum BaseType {
    Int,
    Bool,
    Float,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseType::Int => "int",
            BaseType::Bool => "bool",
            BaseType::Float => "float",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Type {
    Var(TyVar),
    Unit,
    Base(BaseType),
    Arrow(Box<Type>, Box<Type>),
    /// Arity at least 2.
    Tuple(Vec<Type>),
    Record(RecordName, Vec<Type>),
    Poly(Box<Scheme>),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Scheme {
    pub vars: Vec<TyVar>,
    pub body: Type,
}

impl Type {
    pub fn var(v: TyVar) -> Type {
        Type::Var(v)
    }

    pub fn int() -> Type {
        Type::Base(BaseType::Int)
    }

    pub fn bool() -> Type {
        Type::Base(BaseType::Bool)
    }

    pub fn float() -> Type {
        Type::Base(BaseType::Float)
    }

    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    pub fn record(name: &str, args: Vec<Type>) -> Type {
        Type::Record(name.to_string(), args)
    }

    pub fn poly(vars: Vec<TyVar>, body: Type) -> Type {
        Type::Poly(Box::new(Scheme { vars, body }))
    }

    /// Free variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<TyVar> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.collect_free(&mut Vec::new(), &mut seen, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<TyVar>, seen: &mut HashSet<TyVar>, out: &mut Vec<TyVar>) {
        match self {
            Type::Var(v) => {
                if !bound.contains(v) && seen.insert(*v) {
                    out.push(*v);
                }
            }
            Type::Unit | Type::Base(_) => {}
            Type::Arrow(a, b) => {
                a.collect_free(bound, seen, out);
                b.collect_free(bound, seen, out);
            }
            Type::Tuple(ts) | Type::Record(_, ts) => {
                for t in ts {
                    t.collect_free(bound, seen, out);
                }
            }
            Type::Poly(s) => {
                let depth = bound.len();
                bound.extend(s.vars.iter().copied());
                s.body.collect_free(bound, seen, out);
                bound.truncate(depth);
            }
        }
    }

    pub fn occurs_free(&self, v: TyVar) -> bool {
        self.free_vars().contains(&v)
    }

    pub fn is_ground(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Number of constructor and variable nodes.
    pub fn size(&self) -> usize {
        match self {
            Type::Var(_) | Type::Unit | Type::Base(_) => 1,
            Type::Arrow(a, b) => 1 + a.size() + b.size(),
            Type::Tuple(ts) | Type::Record(_, ts) => 1 + ts.iter().map(Type::size).sum::<usize>(),
            Type::Poly(s) => 1 + s.body.size(),
        }
    }

    /// Constructor nesting depth; nullary constructors and variables have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Type::Var(_) | Type::Unit | Type::Base(_) => 1,
            Type::Arrow(a, b) => 1 + a.depth().max(b.depth()),
            Type::Tuple(ts) | Type::Record(_, ts) => {
                1 + ts.iter().map(Type::depth).max().unwrap_or(0)
            }
            Type::Poly(s) => 1 + s.body.depth(),
        }
    }

    /// Capture-avoiding substitution of free variables.
    pub fn subst(&self, map: &HashMap<TyVar, Type>) -> Type {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Type::Var(v) => map.get(v).cloned().unwrap_or(Type::Var(*v)),
            Type::Unit | Type::Base(_) => self.clone(),
            Type::Arrow(a, b) => Type::arrow(a.subst(map), b.subst(map)),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(|t| t.subst(map)).collect()),
            Type::Record(n, ts) => Type::Record(n.clone(), ts.iter().map(|t| t.subst(map)).collect()),
            Type::Poly(s) => Type::Poly(Box::new(s.subst(map))),
        }
    }

    pub fn rename(&self, map: &HashMap<TyVar, TyVar>) -> Type {
        let map: HashMap<TyVar, Type> = map.iter().map(|(k, v)| (*k, Type::Var(*v))).collect();
        self.subst(&map)
    }

    /// Renames every binder to a globally unique name.
    pub fn rename_binders_apart(&self) -> Type {
        match self {
            Type::Var(_) | Type::Unit | Type::Base(_) => self.clone(),
            Type::Arrow(a, b) => Type::arrow(a.rename_binders_apart(), b.rename_binders_apart()),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(Type::rename_binders_apart).collect()),
            Type::Record(n, ts) => {
                Type::Record(n.clone(), ts.iter().map(Type::rename_binders_apart).collect())
            }
            Type::Poly(s) => {
                let fresh: Vec<TyVar> = s.vars.iter().map(|_| TyVar::renamed()).collect();
                let map: HashMap<TyVar, TyVar> =
                    s.vars.iter().copied().zip(fresh.iter().copied()).collect();
                let body = s.body.rename_binders_apart().rename(&map);
                Type::poly(fresh, body)
            }
        }
    }

    /// Deep scheme normalization of every polytype inside the type.
    pub fn normalize(&self) -> Type {
        match self {
            Type::Var(_) | Type::Unit | Type::Base(_) => self.clone(),
            Type::Arrow(a, b) => Type::arrow(a.normalize(), b.normalize()),
            Type::Tuple(ts) => Type::Tuple(ts.iter().map(Type::normalize).collect()),
            Type::Record(n, ts) => Type::Record(n.clone(), ts.iter().map(Type::normalize).collect()),
            Type::Poly(s) => Type::Poly(Box::new(s.normalize())),
        }
    }
}

impl Scheme {
    pub fn new(vars: Vec<TyVar>, body: Type) -> Scheme {
        Scheme { vars, body }
    }

    pub fn mono(body: Type) -> Scheme {
        Scheme { vars: Vec::new(), body }
    }

    /// Generalizes every free variable of `body`.
    pub fn closing(body: Type) -> Scheme {
        Scheme { vars: body.free_vars(), body }.normalize()
    }

    pub fn free_vars(&self) -> Vec<TyVar> {
        Type::Poly(Box::new(self.clone())).free_vars()
    }

    /// Drops unused binders and orders the rest by first occurrence, recursively.
    pub fn normalize(&self) -> Scheme {
        let body = self.body.normalize();
        let vars = body.free_vars().into_iter().filter(|v| self.vars.contains(v)).collect();
        Scheme { vars, body }
    }

    fn subst(&self, map: &HashMap<TyVar, Type>) -> Scheme {
        let body_free: HashSet<TyVar> = self.body.free_vars().into_iter().collect();
        let mut inner: HashMap<TyVar, Type> = map
            .iter()
            .filter(|(k, _)| !self.vars.contains(k) && body_free.contains(k))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        let range_free: HashSet<TyVar> = inner.values().flat_map(Type::free_vars).collect();
        let mut vars = Vec::with_capacity(self.vars.len());
        for &v in &self.vars {
            if range_free.contains(&v) {
                let fresh = TyVar::renamed();
                inner.insert(v, Type::Var(fresh));
                vars.push(fresh);
            } else {
                vars.push(v);
            }
        }
        Scheme { vars, body: self.body.subst(&inner) }
    }

    pub fn instantiate(&self, supply: &mut VarSupply) -> Type {
        let map: HashMap<TyVar, Type> =
            self.vars.iter().map(|v| (*v, Type::Var(supply.fresh()))).collect();
        self.body.subst(&map)
    }

    pub fn alpha_eq(&self, other: &Scheme) -> bool {
        alpha_eq(&Type::Poly(Box::new(self.clone())), &Type::Poly(Box::new(other.clone())))
    }
}

/// Alpha-equivalence, treating polytypes up to binder order and unused binders.
pub fn alpha_eq(a: &Type, b: &Type) -> bool {
    alpha_eq_in(&a.normalize(), &b.normalize(), &mut Vec::new())
}

fn alpha_eq_in(a: &Type, b: &Type, env: &mut Vec<(TyVar, TyVar)>) -> bool {
    match (a, b) {
        (Type::Var(x), Type::Var(y)) => {
            let bx = env.iter().rposition(|(l, _)| l == x);
            let by = env.iter().rposition(|(_, r)| r == y);
            match (bx, by) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            }
        }
        (Type::Unit, Type::Unit) => true,
        (Type::Base(x), Type::Base(y)) => x == y,
        (Type::Arrow(a1, b1), Type::Arrow(a2, b2)) => {
            alpha_eq_in(a1, a2, env) && alpha_eq_in(b1, b2, env)
        }
        (Type::Tuple(xs), Type::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| alpha_eq_in(x, y, env))
        }
        (Type::Record(n1, xs), Type::Record(n2, ys)) => {
            n1 == n2 && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| alpha_eq_in(x, y, env))
        }
        (Type::Poly(s1), Type::Poly(s2)) => {
            if s1.vars.len() != s2.vars.len() {
                return false;
            }
            let depth = env.len();
            env.extend(s1.vars.iter().copied().zip(s2.vars.iter().copied()));
            let ok = alpha_eq_in(&s1.body, &s2.body, env);
            env.truncate(depth);
            ok
        }
        _ => false,
    }
}

/// A type with holes. See the module docs for the canonical naming scheme.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Shape {
    pub holes: Vec<TyVar>,
    pub body: Type,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ShapeKind {
    Trivial,
    Unit,
    Base,
    Arrow,
    Tuple(usize),
    Record,
    Poly,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("a type variable has no non-trivial shape")]
    Variable,
    #[error("shape expects {expected} arguments, got {found}")]
    Arity { expected: usize, found: usize },
}

impl Shape {
    /// The shape whose body is a single hole.
    pub fn trivial() -> Shape {
        let h = TyVar::canonical(0);
        Shape { holes: vec![h], body: Type::Var(h) }
    }

    pub fn arity(&self) -> usize {
        self.holes.len()
    }

    pub fn kind(&self) -> ShapeKind {
        match &self.body {
            Type::Var(_) => ShapeKind::Trivial,
            Type::Unit => ShapeKind::Unit,
            Type::Base(_) => ShapeKind::Base,
            Type::Arrow(..) => ShapeKind::Arrow,
            Type::Tuple(ts) => ShapeKind::Tuple(ts.len()),
            Type::Record(..) => ShapeKind::Record,
            Type::Poly(_) => ShapeKind::Poly,
        }
    }

    pub fn record_name(&self) -> Option<&str> {
        match &self.body {
            Type::Record(n, _) => Some(n),
            _ => None,
        }
    }

    pub fn apply(&self, args: &[Type]) -> Result<Type, ShapeError> {
        shape_apply(self, args)
    }

    /// Short human-readable rendering, holes shown as `_`.
    pub fn describe(&self) -> String {
        let mut namer = Namer::new();
        for &h in &self.holes {
            namer.names.insert(h, "_".to_string());
        }
        let mut out = String::new();
        write_type(&self.body, 0, &mut namer, &mut out);
        out
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Splits a non-variable type into its canonical principal shape and the
/// arguments filling the shape's holes.
pub fn decompose(t: &Type) -> Option<(Shape, Vec<Type>)> {
    let (body, args) = match t {
        Type::Var(_) => return None,
        Type::Unit | Type::Base(_) => return Some((Shape { holes: Vec::new(), body: t.clone() }, Vec::new())),
        Type::Arrow(a, b) => (
            Type::arrow(Type::Var(TyVar::canonical(0)), Type::Var(TyVar::canonical(1))),
            vec![(**a).clone(), (**b).clone()],
        ),
        Type::Tuple(ts) => (
            Type::Tuple((0..ts.len()).map(|i| Type::Var(TyVar::canonical(i))).collect()),
            ts.clone(),
        ),
        Type::Record(n, ts) => (
            Type::Record(n.clone(), (0..ts.len()).map(|i| Type::Var(TyVar::canonical(i))).collect()),
            ts.clone(),
        ),
        Type::Poly(_) => return Some(decompose_poly(t)),
    };
    let holes = (0..args.len()).map(TyVar::canonical).collect();
    Some((Shape { holes, body }, args))
}

fn decompose_poly(t: &Type) -> (Shape, Vec<Type>) {
    let Type::Poly(s) = t.rename_binders_apart().normalize() else { unreachable!() };
    let mut placeholders = Vec::new();
    let mut args = Vec::new();
    let mut bound: Vec<TyVar> = s.vars.clone();
    let body = extract_holes(&s.body, &mut bound, &mut placeholders, &mut args);
    let raw = Type::poly(s.vars.clone(), body);
    let mut names: HashMap<TyVar, TyVar> = placeholders
        .iter()
        .enumerate()
        .map(|(i, h)| (*h, TyVar::canonical(i)))
        .collect();
    let mut next = placeholders.len();
    let body = canonical_binders(&raw, &mut names, &mut next);
    let holes = (0..placeholders.len()).map(TyVar::canonical).collect();
    (Shape { holes, body }, args)
}

/// Replaces each maximal subterm mentioning none of `bound` by a fresh hole.
fn extract_holes(
    t: &Type,
    bound: &mut Vec<TyVar>,
    placeholders: &mut Vec<TyVar>,
    args: &mut Vec<Type>,
) -> Type {
    if !t.free_vars().iter().any(|v| bound.contains(v)) {
        let h = TyVar::renamed();
        placeholders.push(h);
        args.push(t.clone());
        return Type::Var(h);
    }
    match t {
        Type::Var(v) => Type::Var(*v),
        Type::Unit | Type::Base(_) => unreachable!("closed subterms become holes"),
        Type::Arrow(a, b) => Type::arrow(
            extract_holes(a, bound, placeholders, args),
            extract_holes(b, bound, placeholders, args),
        ),
        Type::Tuple(ts) => {
            Type::Tuple(ts.iter().map(|t| extract_holes(t, bound, placeholders, args)).collect())
        }
        Type::Record(n, ts) => Type::Record(
            n.clone(),
            ts.iter().map(|t| extract_holes(t, bound, placeholders, args)).collect(),
        ),
        Type::Poly(s) => {
            let depth = bound.len();
            bound.extend(s.vars.iter().copied());
            let body = extract_holes(&s.body, bound, placeholders, args);
            bound.truncate(depth);
            Type::poly(s.vars.clone(), body)
        }
    }
}

/// Renames binders to canonical names in preorder; `names` already maps holes.
fn canonical_binders(t: &Type, names: &mut HashMap<TyVar, TyVar>, next: &mut usize) -> Type {
    match t {
        Type::Var(v) => Type::Var(names.get(v).copied().unwrap_or(*v)),
        Type::Unit | Type::Base(_) => t.clone(),
        Type::Arrow(a, b) => {
            let a = canonical_binders(a, names, next);
            Type::arrow(a, canonical_binders(b, names, next))
        }
        Type::Tuple(ts) => Type::Tuple(ts.iter().map(|t| canonical_binders(t, names, next)).collect()),
        Type::Record(n, ts) => {
            Type::Record(n.clone(), ts.iter().map(|t| canonical_binders(t, names, next)).collect())
        }
        Type::Poly(s) => {
            let vars: Vec<TyVar> = s
                .vars
                .iter()
                .map(|v| {
                    let c = TyVar::canonical(*next);
                    *next += 1;
                    names.insert(*v, c);
                    c
                })
                .collect();
            Type::poly(vars, canonical_binders(&s.body, names, next))
        }
    }
}

pub fn canonical_shape(t: &Type) -> Result<Shape, ShapeError> {
    decompose(t).map(|(sh, _)| sh).ok_or(ShapeError::Variable)
}

pub fn shape_apply(sh: &Shape, args: &[Type]) -> Result<Type, ShapeError> {
    if args.len() != sh.holes.len() {
        return Err(ShapeError::Arity { expected: sh.holes.len(), found: args.len() });
    }
    let map: HashMap<TyVar, Type> = sh.holes.iter().copied().zip(args.iter().cloned()).collect();
    Ok(sh.body.subst(&map))
}

/// Whether `b` is an instance of `a` under some substitution of `a`'s holes.
pub fn shape_more_general(a: &Shape, b: &Shape) -> bool {
    let holes: HashSet<TyVar> = a.holes.iter().copied().collect();
    let mut subst = HashMap::new();
    match_under(&a.body.normalize(), &b.body.normalize(), &holes, &mut subst, &mut Vec::new())
}

/// One-way matching of `pattern` against `target`, binding only `holes`.
/// Succeeds iff `target` is alpha-equivalent to `pattern` under the returned
/// hole assignment.
pub fn match_type(pattern: &Type, target: &Type, holes: &HashSet<TyVar>) -> Option<HashMap<TyVar, Type>> {
    let mut subst = HashMap::new();
    match_under(&pattern.normalize(), &target.normalize(), holes, &mut subst, &mut Vec::new())
        .then_some(subst)
}

fn match_under(
    p: &Type,
    t: &Type,
    holes: &HashSet<TyVar>,
    subst: &mut HashMap<TyVar, Type>,
    env: &mut Vec<(TyVar, TyVar)>,
) -> bool {
    match (p, t) {
        (Type::Var(x), _) if env.iter().any(|(l, _)| l == x) => {
            let i = env.iter().rposition(|(l, _)| l == x).unwrap();
            matches!(t, Type::Var(y) if env.iter().rposition(|(_, r)| r == y) == Some(i))
        }
        (Type::Var(x), _) if holes.contains(x) => {
            let captured = t.free_vars().iter().any(|v| env.iter().any(|(_, r)| r == v));
            if captured {
                return false;
            }
            match subst.get(x) {
                Some(prev) => alpha_eq(prev, t),
                None => {
                    subst.insert(*x, t.clone());
                    true
                }
            }
        }
        (Type::Var(x), Type::Var(y)) => x == y && !env.iter().any(|(_, r)| r == y),
        (Type::Unit, Type::Unit) => true,
        (Type::Base(x), Type::Base(y)) => x == y,
        (Type::Arrow(a1, b1), Type::Arrow(a2, b2)) => {
            match_under(a1, a2, holes, subst, env) && match_under(b1, b2, holes, subst, env)
        }
        (Type::Tuple(xs), Type::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_under(x, y, holes, subst, env))
        }
        (Type::Record(n1, xs), Type::Record(n2, ys)) => {
            n1 == n2
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| match_under(x, y, holes, subst, env))
        }
        (Type::Poly(s1), Type::Poly(s2)) => {
            if s1.vars.len() != s2.vars.len() {
                return false;
            }
            let depth = env.len();
            env.extend(s1.vars.iter().copied().zip(s2.vars.iter().copied()));
            let ok = match_under(&s1.body, &s2.body, holes, subst, env);
            env.truncate(depth);
            ok
        }
        _ => false,
    }
}

/// Whether `target` is an instance of `scheme` (free variables of the scheme
/// are treated as rigid).
pub fn is_instance(scheme: &Scheme, target: &Type) -> bool {
    let s = scheme.normalize();
    let holes: HashSet<TyVar> = s.vars.iter().copied().collect();
    match_type(&s.body, target, &holes).is_some()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordDecl {
    pub name: RecordName,
    pub params: Vec<TyVar>,
    pub fields: Vec<(Label, Type)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelEnvError {
    #[error("record type `{0}` is declared twice")]
    Redeclared(RecordName),
    #[error("label `{label}` appears twice in record `{record}`")]
    DuplicateField { record: RecordName, label: Label },
    #[error("record `{record}` has a repeated type parameter")]
    DuplicateParam { record: RecordName },
    #[error("field `{label}` of `{record}` mentions an undeclared type variable")]
    UnboundParam { record: RecordName, label: Label },
    #[error("unknown record type `{0}`")]
    UnknownRecord(RecordName),
    #[error("record type `{record}` expects {expected} arguments, got {found}")]
    Arity { record: RecordName, expected: usize, found: usize },
    #[error("record `{0}` has no fields")]
    Empty(RecordName),
}

/// Declared records, in declaration order. Maps `(label, record)` to the
/// projection scheme `∀ᾱ. T[ᾱ] → τ`.
#[derive(Clone, Debug, Default)]
pub struct LabelEnv {
    records: IndexMap<RecordName, RecordDecl>,
}

impl LabelEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, decl: RecordDecl) -> Result<(), LabelEnvError> {
        let name = decl.name.clone();
        if self.records.contains_key(&name) {
            return Err(LabelEnvError::Redeclared(name));
        }
        if decl.fields.is_empty() {
            return Err(LabelEnvError::Empty(name));
        }
        let params: HashSet<TyVar> = decl.params.iter().copied().collect();
        if params.len() != decl.params.len() {
            return Err(LabelEnvError::DuplicateParam { record: name });
        }
        let mut labels = HashSet::new();
        for (label, ty) in &decl.fields {
            if !labels.insert(label) {
                return Err(LabelEnvError::DuplicateField { record: name, label: label.clone() });
            }
            if ty.free_vars().iter().any(|v| !params.contains(v)) {
                return Err(LabelEnvError::UnboundParam { record: name, label: label.clone() });
            }
            self.check_records(ty, &decl)?;
        }
        self.records.insert(name, decl);
        Ok(())
    }

    fn check_records(&self, t: &Type, decl: &RecordDecl) -> Result<(), LabelEnvError> {
        match t {
            Type::Var(_) | Type::Unit | Type::Base(_) => Ok(()),
            Type::Arrow(a, b) => {
                self.check_records(a, decl)?;
                self.check_records(b, decl)
            }
            Type::Tuple(ts) => ts.iter().try_for_each(|t| self.check_records(t, decl)),
            Type::Record(n, ts) => {
                let expected = if *n == decl.name {
                    decl.params.len()
                } else {
                    self.arity(n).ok_or_else(|| LabelEnvError::UnknownRecord(n.clone()))?
                };
                if expected != ts.len() {
                    return Err(LabelEnvError::Arity { record: n.clone(), expected, found: ts.len() });
                }
                ts.iter().try_for_each(|t| self.check_records(t, decl))
            }
            Type::Poly(s) => self.check_records(&s.body, decl),
        }
    }

    pub fn record(&self, name: &str) -> Option<&RecordDecl> {
        self.records.get(name)
    }

    pub fn records(&self) -> impl Iterator<Item = &RecordDecl> {
        self.records.values()
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.records.get(name).map(|d| d.params.len())
    }

    /// `∀ᾱ. T[ᾱ] → τ` for `label` in `record`.
    pub fn projection(&self, label: &str, record: &str) -> Option<Scheme> {
        let decl = self.records.get(record)?;
        let (_, field) = decl.fields.iter().find(|(l, _)| l == label)?;
        let head = Type::Record(decl.name.clone(), decl.params.iter().map(|v| Type::Var(*v)).collect());
        Some(Scheme::new(decl.params.clone(), Type::arrow(head, field.clone())))
    }

    pub fn domain(&self, record: &str) -> Option<BTreeSet<Label>> {
        self.records.get(record).map(|d| d.fields.iter().map(|(l, _)| l.clone()).collect())
    }

    /// The record whose domain is the only one containing `label`.
    pub fn label_unique(&self, label: &str) -> Option<&str> {
        let mut owners = self.records.values().filter(|d| d.fields.iter().any(|(l, _)| l == label));
        let first = owners.next()?;
        owners.next().is_none().then_some(first.name.as_str())
    }

    /// The record whose domain is exactly `labels`, if there is only one.
    pub fn labels_unique(&self, labels: &[Label]) -> Option<&str> {
        let wanted: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
        let mut owners = self.records.values().filter(|d| {
            let dom: BTreeSet<&str> = d.fields.iter().map(|(l, _)| l.as_str()).collect();
            dom == wanted
        });
        let first = owners.next()?;
        owners.next().is_none().then_some(first.name.as_str())
    }
}

/// Assigns `'a`, `'b`, … to variables in order of first request.
#[derive(Debug, Default)]
pub struct Namer {
    names: HashMap<TyVar, String>,
    next: usize,
    prefix: &'static str,
}

impl Namer {
    pub fn new() -> Self {
        Namer { names: HashMap::new(), next: 0, prefix: "'" }
    }

    /// Unlisted variables print as `'_a`, `'_b`, …
    pub fn with_prefix(prefix: &'static str) -> Self {
        Namer { names: HashMap::new(), next: 0, prefix }
    }

    pub fn name(&mut self, v: TyVar) -> String {
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let n = format!("{}{}", self.prefix, letter_name(self.next));
        self.next += 1;
        self.names.insert(v, n.clone());
        n
    }

    pub fn assign(&mut self, v: TyVar, name: String) {
        self.names.insert(v, name);
    }

    fn fresh_binder(&mut self, v: TyVar) -> String {
        let n = format!("'{}", letter_name(self.next));
        self.next += 1;
        self.names.insert(v, n.clone());
        n
    }
}

fn letter_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        k => format!("{letter}{k}"),
    }
}

/// Precedence: 0 accepts arrows, 1 accepts tuples, 2 only atoms.
pub fn write_type(t: &Type, prec: u8, namer: &mut Namer, out: &mut String) {
    match t {
        Type::Var(v) => out.push_str(&namer.name(*v)),
        Type::Unit => out.push_str("unit"),
        Type::Base(b) => {
            let _ = write!(out, "{b}");
        }
        Type::Arrow(a, b) => {
            if prec > 0 {
                out.push('(');
            }
            write_type(a, 1, namer, out);
            out.push_str(" -> ");
            write_type(b, 0, namer, out);
            if prec > 0 {
                out.push(')');
            }
        }
        Type::Tuple(ts) => {
            if prec > 1 {
                out.push('(');
            }
            for (i, c) in ts.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                write_type(c, 2, namer, out);
            }
            if prec > 1 {
                out.push(')');
            }
        }
        Type::Record(n, args) => {
            match args.len() {
                0 => {}
                1 => {
                    write_type(&args[0], 2, namer, out);
                    out.push(' ');
                }
                _ => {
                    out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        write_type(a, 0, namer, out);
                    }
                    out.push_str(") ");
                }
            }
            out.push_str(n);
        }
        Type::Poly(s) => {
            out.push('[');
            if !s.vars.is_empty() {
                for (i, v) in s.vars.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let n = namer.fresh_binder(*v);
                    out.push_str(&n);
                }
                out.push_str(". ");
            }
            write_type(&s.body, 0, namer, out);
            out.push(']');
        }
    }
}

/// Renders a type, naming variables `'a`, `'b`, … by first occurrence.
pub fn show_type(t: &Type) -> String {
    let mut out = String::new();
    write_type(t, 0, &mut Namer::new(), &mut out);
    out
}

/// Renders a scheme with implicit quantification: every quantified variable
/// prints as `'a`, `'b`, …; any other free variable prints as `'_a`, `'_b`, …
pub fn show_scheme(s: &Scheme) -> String {
    let s = s.normalize();
    let mut namer = Namer::new();
    let mut weak = Namer::with_prefix("'_");
    for v in s.body.free_vars() {
        if s.vars.contains(&v) {
            namer.name(v);
        } else {
            let n = weak.name(v);
            namer.assign(v, n);
        }
    }
    let mut out = String::new();
    write_type(&s.body, 0, &mut namer, &mut out);
    out
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&show_type(self))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&show_scheme(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> Type {
        Type::Var(TyVar(i))
    }

    fn pid(a: u32) -> Type {
        Type::poly(vec![TyVar(a)], Type::arrow(v(a), v(a)))
    }

    #[test]
    fn record_shape_has_no_holes() {
        let sh = canonical_shape(&Type::record("point", vec![])).unwrap();
        assert_eq!(sh.arity(), 0);
        assert_eq!(sh.body, Type::record("point", vec![]));
    }

    #[test]
    fn variable_has_no_shape() {
        assert_eq!(canonical_shape(&v(0)), Err(ShapeError::Variable));
    }

    #[test]
    fn arrow_shape_applies() {
        let sh = canonical_shape(&Type::arrow(v(0), v(1))).unwrap();
        assert_eq!(sh.apply(&[Type::int(), Type::bool()]).unwrap(), Type::arrow(Type::int(), Type::bool()));
        assert!(matches!(sh.apply(&[Type::int()]), Err(ShapeError::Arity { .. })));
    }

    #[test]
    fn nested_polytype_mentioning_outer_binder_is_descended() {
        // [∀a. ([∀b. b → a * (int * int)] → a) → a]
        let pair = Type::Tuple(vec![Type::int(), Type::int()]);
        let inner = Type::poly(vec![TyVar(1)], Type::arrow(v(1), Type::Tuple(vec![v(0), pair.clone()])));
        let t = Type::poly(vec![TyVar(0)], Type::arrow(Type::arrow(inner, v(0)), v(0)));
        let (sh, args) = decompose(&t).unwrap();
        assert_eq!(args, vec![pair]);
        assert_eq!(sh.describe(), "['a. (['b. 'b -> 'a * _] -> 'a) -> 'a]");
    }

    #[test]
    fn closed_nested_polytype_becomes_one_hole() {
        // [∀a. ([∀b. b → int * int] → a) → a]
        let pair = Type::Tuple(vec![Type::int(), Type::int()]);
        let inner = Type::poly(vec![TyVar(1)], Type::arrow(v(1), pair));
        let t = Type::poly(vec![TyVar(0)], Type::arrow(Type::arrow(inner.clone(), v(0)), v(0)));
        let (sh, args) = decompose(&t).unwrap();
        assert_eq!(args.len(), 1);
        assert!(alpha_eq(&args[0], &inner));
        assert_eq!(sh.describe(), "['a. (_ -> 'a) -> 'a]");
    }

    #[test]
    fn alpha_equivalent_polytypes_share_a_shape() {
        let a = Type::poly(vec![TyVar(3), TyVar(4)], Type::arrow(v(3), v(4)));
        let b = Type::poly(vec![TyVar(9), TyVar(8), TyVar(7)], Type::arrow(v(8), v(7)));
        assert_eq!(canonical_shape(&a).unwrap(), canonical_shape(&b).unwrap());
        assert_eq!(canonical_shape(&pid(1)).unwrap(), canonical_shape(&pid(5)).unwrap());
        assert_ne!(canonical_shape(&a).unwrap(), canonical_shape(&pid(1)).unwrap());
    }

    #[test]
    fn monomorphic_polytype_is_a_single_hole() {
        let (sh, args) = decompose(&Type::poly(vec![], Type::int())).unwrap();
        assert_eq!(args, vec![Type::int()]);
        assert_eq!(sh.describe(), "[_]");
    }

    #[test]
    fn free_variables_inside_polytypes_become_holes() {
        let t = Type::poly(vec![TyVar(0)], Type::arrow(v(0), v(7)));
        let (sh, args) = decompose(&t).unwrap();
        assert_eq!(args, vec![v(7)]);
        assert!(alpha_eq(&shape_apply(&sh, &args).unwrap(), &t));
    }
}
