//! The constraint solver.
//!
//! Constraints are walked depth-first. Equations are solved eagerly by the
//! unification engine and matches suspend on the wait list of their
//! scrutinee. Each `Let` opens a region that is generalized, possibly
//! partially, once its definition has been walked.
//!
//! Instantiation is incremental. An instance keeps a map from classes of its
//! region to copies at the instantiation site and watches those classes, so a
//! later refinement of a partial scheme reaches every instance. Classes that
//! leave the region become monomorphic and are unified with their copies.
//! When nothing else can progress, a stuck match whose scrutinee belongs to a
//! let region may still be discharged with a shape one of the region's
//! instances has acquired.

use std::collections::{HashMap, HashSet, VecDeque};
use std::rc::Rc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::constraint::{self, Constraint, FalseReason, Match, Origin, RecordRef, SchemeRef};
use crate::types::{decompose, show_type, LabelEnv, Scheme, Shape, TyVar, Type, VarSupply};
use crate::unify::{Engine, Event, NodeId, ScopeId, UnifyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConjunctionOrder {
    #[default]
    LeftFirst,
    RightFirst,
}

#[derive(Clone, Debug, Default)]
pub struct SolverOptions {
    pub order: ConjunctionOrder,
    pub trace: bool,
    /// Fail with an internal error past this many rule applications.
    pub max_steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StuckMatch {
    pub origin: Origin,
    pub scrutinee: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SolveError {
    #[error("type mismatch between {left} and {right}")]
    Clash { left: String, right: String },
    #[error("cyclic type {ty}")]
    Cycle { ty: String },
    #[error("{0}")]
    LabelError(String),
    #[error("{0}")]
    DomainError(String),
    #[error("ambiguous {}", .0.first().map(|s| s.origin.what.as_str()).unwrap_or("match"))]
    Ambiguous(Vec<StuckMatch>),
    #[error("{0}")]
    Escape(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// The scheme of a `let`, read off the final graph. Quantified variables are
/// those still generic in the let's region; other free variables are
/// monomorphic.
#[derive(Clone, Debug)]
pub struct LetScheme {
    pub name: String,
    /// Nesting depth of the let's scope; top-level lets have depth 1.
    pub depth: u32,
    pub scheme: Scheme,
}

/// Every `let` of the constraint, in the order the solver entered them.
#[derive(Clone, Debug, Default)]
pub struct Solution {
    pub lets: Vec<LetScheme>,
}

impl Solution {
    /// The first let bound to `name`.
    pub fn scheme_of(&self, name: &str) -> Option<&Scheme> {
        self.lets.iter().find(|l| l.name == name).map(|l| &l.scheme)
    }
}

/// Counters and histories used by the termination checks.
#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub steps: u64,
    /// Number of match constructors not yet discharged, after every rule.
    pub match_counts: Vec<usize>,
    /// Instantiation constraints left before and after each `S-Let-AppR`.
    pub app_steps: Vec<(usize, usize)>,
    pub discharges: u64,
    pub backprops: u64,
    pub instances: u64,
    pub copies: u64,
    /// Changes to classes of an already generalized region.
    pub generic_mutations: u64,
    pub regeneralizations: u64,
    pub lowered: u64,
    pub collected: u64,
    pub merges: u64,
    pub decompositions: u64,
    pub weight_created: u64,
}

/// Classification of the structureless classes of a generalized region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarClass {
    /// Generic: no suspended constraint can refine it.
    G,
    /// Partially generic: a suspended constraint may still refine it.
    PG,
}

/// Diagnostics from a run, successful or not.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub stats: Stats,
    pub trace: Vec<String>,
    /// Whether the final graph is in solved form.
    pub solved_form: bool,
}

/// Solves a closed constraint.
pub fn solve(c: &Constraint, labels: &LabelEnv, opts: &SolverOptions) -> (Result<Solution, SolveError>, Report) {
    let mut s = Solver::new(c, labels, opts);
    let result = s.run(c);
    s.stats.merges = s.g.stats.merges;
    s.stats.decompositions = s.g.stats.decompositions;
    s.stats.weight_created = s.g.stats.weight_created;
    let report = Report { stats: s.stats.clone(), trace: std::mem::take(&mut s.trace), solved_form: s.g.solved_form() };
    (result, report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Open,
    Generalized,
    Partial,
    /// Generalized, then changed; classes are recomputed before the next use.
    Stale,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct RegionId(u32);

const ROOT_REGION: RegionId = RegionId(0);

#[derive(Debug)]
struct Region {
    name: String,
    scope: ScopeId,
    root: Option<NodeId>,
    status: Status,
    owned: Vec<NodeId>,
    instances: Vec<u32>,
    classes: HashMap<NodeId, VarClass>,
}

#[derive(Debug)]
struct Instance {
    region: RegionId,
    site: ScopeId,
    /// Source class (by representative) to its copy at the site.
    map: IndexMap<NodeId, NodeId>,
    /// Sources whose structure has been copied.
    copied: HashSet<NodeId>,
}

#[derive(Debug)]
enum Env {
    Nil,
    Cons(String, RegionId, Rc<Env>),
}

fn lookup(env: &Rc<Env>, x: &str) -> Option<RegionId> {
    let mut cur = env;
    loop {
        match &**cur {
            Env::Nil => return None,
            Env::Cons(y, r, next) => {
                if y == x {
                    return Some(*r);
                }
                cur = next;
            }
        }
    }
}

#[derive(Debug)]
struct Handle {
    m: Match,
    node: NodeId,
    scope: ScopeId,
    env: Rc<Env>,
    live: bool,
    matches: usize,
    apps: usize,
}

#[derive(Debug)]
enum Task {
    Discharge(u32),
    Inst(u32, NodeId),
    Unify(NodeId, NodeId),
}

struct Solver<'a> {
    labels: &'a LabelEnv,
    opts: &'a SolverOptions,
    g: Engine,
    supply: VarSupply,
    vars: HashMap<TyVar, NodeId>,
    regions: Vec<Region>,
    /// Region of each scope: the let scope itself or the nearest enclosing one.
    scope_region: Vec<RegionId>,
    insts: Vec<Instance>,
    handles: Vec<Handle>,
    queue: VecDeque<Task>,
    stats: Stats,
    trace: Vec<String>,
    match_count: usize,
    app_count: usize,
}

fn false_error(reason: &FalseReason) -> SolveError {
    match reason {
        FalseReason::Label { .. } => SolveError::LabelError(reason.to_string()),
        FalseReason::Domain { .. } => SolveError::DomainError(reason.to_string()),
        FalseReason::NoBranch { shape, origin } => {
            SolveError::Clash { left: shape.clone(), right: format!("the argument of {}", origin.what) }
        }
        FalseReason::Other(s) => SolveError::Internal(s.clone()),
    }
}

impl<'a> Solver<'a> {
    fn new(c: &Constraint, labels: &'a LabelEnv, opts: &'a SolverOptions) -> Self {
        let g = Engine::new();
        let root = g.root_scope();
        Solver {
            labels,
            opts,
            g,
            supply: VarSupply::starting_after(c.max_var()),
            vars: HashMap::new(),
            regions: vec![Region {
                name: String::new(),
                scope: root,
                root: None,
                status: Status::Open,
                owned: Vec::new(),
                instances: Vec::new(),
                classes: HashMap::new(),
            }],
            scope_region: vec![ROOT_REGION],
            insts: Vec::new(),
            handles: Vec::new(),
            queue: VecDeque::new(),
            stats: Stats::default(),
            trace: Vec::new(),
            match_count: c.count_matches(),
            app_count: c.count_apps(),
        }
    }

    fn run(&mut self, c: &Constraint) -> Result<Solution, SolveError> {
        self.stats.match_counts.push(self.match_count);
        let root = self.g.root_scope();
        self.walk(c, root, &Rc::new(Env::Nil))?;
        self.drain()?;
        self.fixpoint()?;
        if self.match_count != 0 {
            return Err(SolveError::Internal(format!("{} matches unaccounted for", self.match_count)));
        }
        for i in 1..self.regions.len() {
            if self.regions[i].status == Status::Stale {
                self.try_generalize(RegionId(i as u32))?;
            }
        }
        let lets = (1..self.regions.len())
            .map(|i| {
                let r = &self.regions[i];
                LetScheme {
                    name: r.name.clone(),
                    depth: self.g.depth(r.scope),
                    scheme: self.region_scheme(RegionId(i as u32)),
                }
            })
            .collect();
        Ok(Solution { lets })
    }

    /// Discharges stuck matches by backpropagation until none is left, or
    /// reports the remaining ones as ambiguous.
    fn fixpoint(&mut self) -> Result<(), SolveError> {
        while self.handles.iter().any(|h| h.live) {
            let live: Vec<u32> = (0..self.handles.len() as u32).filter(|&h| self.handles[h as usize].live).collect();
            let found = live.iter().find_map(|&h| self.unicity(h).map(|sh| (h, sh)));
            match found {
                Some((h, sh)) => {
                    self.stats.backprops += 1;
                    self.discharge(h, sh, "Uni-BackProp")?;
                    self.drain()?;
                }
                None => {
                    let stuck = live
                        .iter()
                        .map(|&h| {
                            let h = &self.handles[h as usize];
                            StuckMatch { origin: h.m.origin.clone(), scrutinee: show_type(&self.g.read(h.node)) }
                        })
                        .collect();
                    return Err(SolveError::Ambiguous(stuck));
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, rule: &str, detail: impl FnOnce(&Self) -> String) -> Result<(), SolveError> {
        self.stats.steps += 1;
        self.stats.match_counts.push(self.match_count);
        if self.opts.trace {
            let d = detail(self);
            self.trace.push(if d.is_empty() { rule.to_string() } else { format!("{rule} {d}") });
        }
        match self.opts.max_steps {
            Some(max) if self.stats.steps > max => {
                Err(SolveError::Internal(format!("step budget of {max} exceeded")))
            }
            _ => Ok(()),
        }
    }

    fn show(&self, n: NodeId) -> String {
        show_type(&self.g.read(n))
    }

    fn region_of(&self, s: ScopeId) -> RegionId {
        self.scope_region[s.0 as usize]
    }

    fn region(&self, r: RegionId) -> &Region {
        &self.regions[r.0 as usize]
    }

    fn new_scope(&mut self, parent: ScopeId, region: Option<RegionId>) -> ScopeId {
        let s = self.g.new_scope(parent);
        let r = region.unwrap_or_else(|| self.region_of(parent));
        self.scope_region.push(r);
        s
    }

    fn own(&mut self, n: NodeId, scope: ScopeId) {
        let r = self.region_of(scope);
        self.regions[r.0 as usize].owned.push(n);
    }

    fn fresh(&mut self, scope: ScopeId) -> NodeId {
        let n = self.g.fresh(scope);
        self.own(n, scope);
        n
    }

    /// Whether the class of `n` lives in region `r`'s scope or below it.
    fn inside(&self, n: NodeId, r: RegionId) -> bool {
        self.g.is_within(self.g.scope(n), self.region(r).scope)
    }

    fn node_of(&mut self, t: &Type, scope: ScopeId) -> Result<NodeId, SolveError> {
        match t {
            Type::Var(v) => {
                if let Some(n) = self.vars.get(v) {
                    return Ok(*n);
                }
                // A free variable of the whole constraint.
                let root = self.g.root_scope();
                let n = self.fresh(root);
                self.vars.insert(*v, n);
                Ok(n)
            }
            _ => {
                let (sh, args) = decompose(t).expect("non-variable types decompose");
                let children = args.iter().map(|a| self.node_of(a, scope)).collect::<Result<Vec<_>, _>>()?;
                let n = self.g.structure(sh, children, scope).map_err(|e| self.unify_error(e))?;
                self.own(n, scope);
                Ok(n)
            }
        }
    }

    fn unify_error(&self, e: UnifyError) -> SolveError {
        match e {
            UnifyError::Clash { left, right } => SolveError::Clash { left: left.describe(), right: right.describe() },
            UnifyError::Cycle { node } => SolveError::Cycle { ty: self.show(node) },
            UnifyError::RigidStructure { shape } => {
                SolveError::Escape(format!("a universally quantified variable cannot be {}", shape.describe()))
            }
            UnifyError::RigidClash => {
                SolveError::Escape("two universally quantified variables cannot be equal".to_string())
            }
            UnifyError::Escape => SolveError::Escape("a universally quantified variable escapes its scope".to_string()),
        }
    }

    fn unify(&mut self, a: NodeId, b: NodeId) -> Result<(), SolveError> {
        self.g.unify(a, b).map_err(|e| self.unify_error(e))
    }

    fn walk(&mut self, c: &Constraint, scope: ScopeId, env: &Rc<Env>) -> Result<(), SolveError> {
        match c {
            Constraint::True => Ok(()),
            Constraint::False(reason) => Err(false_error(reason)),
            Constraint::And(a, b) => {
                let (first, second) = match self.opts.order {
                    ConjunctionOrder::LeftFirst => (a, b),
                    ConjunctionOrder::RightFirst => (b, a),
                };
                self.walk(first, scope, env)?;
                self.walk(second, scope, env)
            }
            Constraint::Exists(vs, body) => {
                for v in vs {
                    let n = self.fresh(scope);
                    self.vars.insert(*v, n);
                }
                self.walk(body, scope, env)
            }
            Constraint::Forall(vs, body) => {
                let f = self.new_scope(scope, None);
                for v in vs {
                    let n = self.g.fresh_rigid(f);
                    self.own(n, f);
                    self.vars.insert(*v, n);
                }
                self.step("S-All", |_| format!("{} rigid", vs.len()))?;
                self.walk(body, f, env)
            }
            Constraint::Eq(a, b) => {
                let na = self.node_of(a, scope)?;
                let nb = self.node_of(b, scope)?;
                self.step("S-Unif", |s| format!("{} = {}", s.show(na), s.show(nb)))?;
                self.unify(na, nb)?;
                self.drain()
            }
            Constraint::Let(x, v, def, body) => {
                let rid = RegionId(self.regions.len() as u32);
                let rs = self.new_scope(scope, Some(rid));
                let root = self.g.fresh(rs);
                self.regions.push(Region {
                    name: x.clone(),
                    scope: rs,
                    root: Some(root),
                    status: Status::Open,
                    owned: vec![root],
                    instances: Vec::new(),
                    classes: HashMap::new(),
                });
                self.vars.insert(*v, root);
                self.step("S-Let", |_| x.clone())?;
                self.walk(def, rs, env)?;
                self.drain()?;
                self.try_generalize(rid)?;
                let env = Rc::new(Env::Cons(x.clone(), rid, env.clone()));
                self.walk(body, scope, &env)
            }
            Constraint::App(x, t) => {
                let rid = lookup(env, x).ok_or_else(|| SolveError::Internal(format!("unbound term variable {x}")))?;
                let target = self.node_of(t, scope)?;
                self.instantiate(rid, target, scope)?;
                self.drain()
            }
            Constraint::Match(m) => {
                let node = self.node_of(&m.scrutinee, scope)?;
                let h = self.handles.len() as u32;
                self.handles.push(Handle {
                    m: (**m).clone(),
                    node,
                    scope,
                    env: env.clone(),
                    live: true,
                    matches: c.count_matches(),
                    apps: c.count_apps(),
                });
                if self.g.desc(node).structure.is_some() {
                    self.queue.push_back(Task::Discharge(h));
                } else {
                    self.g.desc_mut(node).waiters.push(h);
                    self.step("S-Match-Suspend", |s| format!("on {}", s.show(node)))?;
                }
                self.drain()
            }
            Constraint::LabLeq(_, RecordRef::Name(_), ..)
            | Constraint::DomEq(RecordRef::Name(_), _)
            | Constraint::SchemeLeq(SchemeRef::Scheme(_), _)
            | Constraint::AbsLeq(_, SchemeRef::Scheme(_)) => {
                // `x ≤ σ` and its expansion `∀ᾱ. x ≤ τ` both count as one instantiation.
                let expanded = constraint::desugar(c, self.labels, &mut self.supply);
                self.walk(&expanded, scope, env)
            }
            Constraint::LabLeq(..) | Constraint::DomEq(..) | Constraint::SchemeLeq(..) | Constraint::AbsLeq(..) => {
                Err(SolveError::Internal("pattern variable outside its match branch".to_string()))
            }
        }
    }

    /// Processes pending events and tasks until none remain.
    fn drain(&mut self) -> Result<(), SolveError> {
        loop {
            if !self.g.events.is_empty() {
                for e in std::mem::take(&mut self.g.events) {
                    self.on_event(e);
                }
                continue;
            }
            match self.queue.pop_front() {
                None => return Ok(()),
                Some(Task::Discharge(h)) => {
                    if !self.handles[h as usize].live {
                        continue;
                    }
                    let node = self.handles[h as usize].node;
                    match self.g.desc(node).structure.as_ref().map(|s| s.shape.clone()) {
                        Some(sh) => self.discharge(h, sh, "Uni-Type")?,
                        None => return Err(SolveError::Internal("woken match has no shape".to_string())),
                    }
                }
                Some(Task::Inst(i, src)) => self.process(i, src)?,
                Some(Task::Unify(a, b)) => {
                    self.step("S-Inst-Unify", |s| format!("{} = {}", s.show(a), s.show(b)))?;
                    self.unify(a, b)?;
                }
            }
        }
    }

    fn mark_mutation(&mut self, scope: ScopeId) {
        let r = self.region_of(scope);
        if r == ROOT_REGION {
            return;
        }
        let region = &mut self.regions[r.0 as usize];
        if region.status != Status::Open {
            self.stats.generic_mutations += 1;
            region.status = Status::Stale;
        }
    }

    fn on_event(&mut self, e: Event) {
        match e {
            Event::Merged { into, from, scopes } => {
                self.mark_mutation(scopes[0]);
                self.mark_mutation(scopes[1]);
                let structured = self.g.desc(into).structure.is_some();
                for w in self.g.desc(into).watchers.clone() {
                    let inst = &mut self.insts[w as usize];
                    if let Some(e_from) = inst.map.shift_remove(&from) {
                        match inst.map.get(&into) {
                            // Two copies of one class within an instance.
                            Some(&e_into) => self.queue.push_back(Task::Unify(e_into, e_from)),
                            None => {
                                inst.map.insert(into, e_from);
                            }
                        }
                    }
                    if inst.copied.remove(&from) && structured {
                        inst.copied.insert(into);
                    }
                    self.queue.push_back(Task::Inst(w, into));
                }
            }
            Event::Structured { node, scope_before } => {
                self.mark_mutation(scope_before);
                for h in std::mem::take(&mut self.g.desc_mut(node).waiters) {
                    self.queue.push_back(Task::Discharge(h));
                }
                for w in self.g.desc(node).watchers.clone() {
                    self.queue.push_back(Task::Inst(w, node));
                }
            }
            Event::Lowered { node, from } => {
                self.mark_mutation(from);
                for w in self.g.desc(node).watchers.clone() {
                    self.queue.push_back(Task::Inst(w, node));
                }
            }
        }
    }

    /// Reduces a match to the branch selected by `sh`.
    fn discharge(&mut self, h: u32, sh: Shape, rule: &str) -> Result<(), SolveError> {
        let handle = &mut self.handles[h as usize];
        handle.live = false;
        let (m, scope, env) = (handle.m.clone(), handle.scope, handle.env.clone());
        let (matches, apps) = (handle.matches, handle.apps);
        let c = constraint::discharge(&m, &sh, self.labels, &mut self.supply);
        self.match_count = self.match_count + c.count_matches() - matches;
        self.app_count = self.app_count + c.count_apps() - apps;
        self.stats.discharges += 1;
        self.step(rule, |_| format!("{} with {}", m.origin.what, sh.describe()))?;
        self.walk(&c, scope, &env)?;
        self.drain()
    }

    /// Starts an instance of region `rid` at `site`, bound to `target`.
    fn instantiate(&mut self, rid: RegionId, target: NodeId, site: ScopeId) -> Result<(), SolveError> {
        if self.region(rid).status == Status::Stale {
            self.stats.regeneralizations += 1;
            self.try_generalize(rid)?;
        }
        let before = self.app_count;
        self.app_count = self.app_count.saturating_sub(1);
        self.stats.app_steps.push((before, self.app_count));
        self.stats.instances += 1;
        let name = self.region(rid).name.clone();
        self.step("S-Let-AppR", |_| name)?;
        let i = self.insts.len() as u32;
        self.insts.push(Instance { region: rid, site, map: IndexMap::new(), copied: HashSet::new() });
        self.regions[rid.0 as usize].instances.push(i);
        let root = self.region(rid).root.expect("let regions have a root");
        self.inst_entry(i, root, target)
    }

    /// Records that instance `i` maps `src` to `target`.
    fn inst_entry(&mut self, i: u32, src: NodeId, target: NodeId) -> Result<(), SolveError> {
        let src = self.g.find(src);
        match self.insts[i as usize].map.get(&src) {
            Some(&e) => {
                self.step("S-Inst-Unify", |s| format!("{} = {}", s.show(e), s.show(target)))?;
                self.unify(e, target)
            }
            None => {
                self.watch(i, src, target);
                self.queue.push_back(Task::Inst(i, src));
                Ok(())
            }
        }
    }

    fn watch(&mut self, i: u32, src: NodeId, entry: NodeId) {
        self.insts[i as usize].map.insert(src, entry);
        let ws = &mut self.g.desc_mut(src).watchers;
        if !ws.contains(&i) {
            ws.push(i);
        }
    }

    /// Brings the copy of `src` in instance `i` up to date.
    fn process(&mut self, i: u32, src: NodeId) -> Result<(), SolveError> {
        let src = self.g.find(src);
        let Some(&entry) = self.insts[i as usize].map.get(&src) else {
            return Ok(());
        };
        let (rid, site) = (self.insts[i as usize].region, self.insts[i as usize].site);
        if !self.inside(src, rid) {
            if self.g.find(entry) != src {
                self.step("S-Inst-Mono", |s| s.show(src))?;
                self.unify(entry, src)?;
            }
            return Ok(());
        }
        let Some(st) = self.g.desc(src).structure.clone() else {
            // A generic or partially generic variable: the copy stays free.
            return Ok(());
        };
        if !self.insts[i as usize].copied.insert(src) {
            return Ok(());
        }
        if self.g.reaches_itself(src) {
            return Err(SolveError::Cycle { ty: self.show(src) });
        }
        let mut kids = Vec::with_capacity(st.children.len());
        for c in st.children {
            let c = self.g.find(c);
            if !self.inside(c, rid) {
                kids.push(c);
            } else if let Some(&e) = self.insts[i as usize].map.get(&c) {
                kids.push(e);
            } else {
                let e = self.fresh(site);
                self.watch(i, c, e);
                self.queue.push_back(Task::Inst(i, c));
                kids.push(e);
            }
        }
        let copy = self.g.structure(st.shape, kids, site).map_err(|e| self.unify_error(e))?;
        self.own(copy, site);
        self.stats.copies += 1;
        self.step("S-Inst-Copy", |s| s.show(copy))?;
        self.unify(entry, copy)
    }

    /// Syntactic unicity for a stuck handle: the shape of its scrutinee, or a
    /// shape one of the region's instances has acquired for it.
    fn unicity(&mut self, h: u32) -> Option<Shape> {
        let node = self.g.find(self.handles[h as usize].node);
        if let Some(s) = &self.g.desc(node).structure {
            return Some(s.shape.clone());
        }
        let mut seen = HashSet::new();
        self.backprop(node, &mut seen)
    }

    fn backprop(&mut self, node: NodeId, seen: &mut HashSet<NodeId>) -> Option<Shape> {
        let node = self.g.find(node);
        if !seen.insert(node) {
            return None;
        }
        let rid = self.region_of(self.g.scope(node));
        if rid == ROOT_REGION {
            return None;
        }
        let entries: Vec<NodeId> = self
            .region(rid)
            .instances
            .iter()
            .filter_map(|&i| self.insts[i as usize].map.get(&node).copied())
            .collect();
        for e in &entries {
            if let Some(s) = &self.g.desc(*e).structure {
                return Some(s.shape.clone());
            }
        }
        entries.into_iter().find_map(|e| self.backprop(e, seen))
    }

    /// Generalizes region `rid` after its definition has been solved, or
    /// recomputes its classes when it has gone stale.
    fn try_generalize(&mut self, rid: RegionId) -> Result<(), SolveError> {
        let scope = self.region(rid).scope;
        let parent = self.g.parent(scope).expect("let scopes have a parent");
        self.compress(rid);

        // Structure built only from outer classes is determined by them.
        loop {
            let mut changed = false;
            for n in self.region(rid).owned.clone() {
                let n = self.g.find(n);
                let d = self.g.desc(n);
                if d.rigid.is_some() || !self.inside(n, rid) {
                    continue;
                }
                let Some(st) = &d.structure else { continue };
                if st.children.iter().all(|c| !self.inside(*c, rid)) {
                    self.g.lower(n, parent).map_err(|e| self.unify_error(e))?;
                    self.stats.lowered += 1;
                    self.step("S-Exists-Lower", |s| s.show(n))?;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.drain()?;
        self.compress(rid);

        let guarded = self.guarded(rid);
        let root = self.region(rid).root.map(|r| self.g.find(r));
        let reachable = self.reachable_inside(rid, root.into_iter().collect());
        let mut classes = HashMap::new();
        let mut kept = Vec::new();
        let mut collected = 0;
        for n in self.region(rid).owned.clone() {
            let d = self.g.desc(n);
            let live = reachable.contains(&n) || guarded.contains(&n);
            if !live && d.waiters.is_empty() && d.watchers.is_empty() {
                collected += 1;
                continue;
            }
            kept.push(n);
            if d.structure.is_none() {
                classes.insert(n, if guarded.contains(&n) { VarClass::PG } else { VarClass::G });
            }
        }
        self.stats.collected += collected;
        let partial = classes.values().any(|c| *c == VarClass::PG);
        let region = &mut self.regions[rid.0 as usize];
        region.owned = kept;
        region.classes = classes;
        region.status = if partial { Status::Partial } else { Status::Generalized };
        let name = region.name.clone();
        self.step(if partial { "S-Let-Partial" } else { "S-Let-Gen" }, |_| name)
    }

    /// Replaces owned nodes by their representatives and hands classes that
    /// have left the region to the region now holding them.
    fn compress(&mut self, rid: RegionId) {
        let owned = std::mem::take(&mut self.regions[rid.0 as usize].owned);
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for n in owned {
            let r = self.g.find(n);
            if !seen.insert(r) {
                continue;
            }
            if self.inside(r, rid) {
                kept.push(r);
            } else {
                let s = self.g.scope(r);
                self.own(r, s);
            }
        }
        self.regions[rid.0 as usize].owned = kept;
    }

    /// Classes of the region a suspended constraint may still refine.
    fn guarded(&mut self, rid: RegionId) -> HashSet<NodeId> {
        let scope = self.region(rid).scope;
        let mut seeds = Vec::new();
        for h in &self.handles {
            if h.live && self.g.is_within(h.scope, scope) {
                seeds.push(h.node);
                for v in Constraint::Match(Box::new(h.m.clone())).free_vars() {
                    if let Some(n) = self.vars.get(&v) {
                        seeds.push(*n);
                    }
                }
            }
        }
        for inst in &self.insts {
            if !self.g.is_within(inst.site, scope) {
                continue;
            }
            if self.regions[inst.region.0 as usize].status != Status::Generalized {
                seeds.extend(inst.map.values().copied());
            }
        }
        self.reachable_inside(rid, seeds)
    }

    /// Classes inside the region reachable from `seeds` through structure.
    fn reachable_inside(&mut self, rid: RegionId, seeds: Vec<NodeId>) -> HashSet<NodeId> {
        let mut seen = HashSet::new();
        let mut stack = seeds;
        while let Some(n) = stack.pop() {
            let n = self.g.find(n);
            if !self.inside(n, rid) || !seen.insert(n) {
                continue;
            }
            stack.extend(self.g.children(n));
        }
        seen
    }

    /// Reads the let's scheme: structureless classes still inside the region
    /// are quantified.
    fn region_scheme(&self, rid: RegionId) -> Scheme {
        let root = self.region(rid).root.expect("let regions have a root");
        let body = self.g.read(root);
        let vars = body.free_vars().into_iter().filter(|v| self.inside(NodeId(v.0), rid)).collect();
        Scheme::new(vars, body).normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{Origin, Pattern};
    use crate::surface::Span;

    fn v(i: u32) -> TyVar {
        TyVar(i)
    }

    fn wild(scrutinee: u32, body: Constraint) -> Constraint {
        Constraint::match_(Type::var(v(scrutinee)), vec![(Pattern::Wildcard, body)], Origin::new(Span::default(), "test"))
    }

    fn run(c: &Constraint) -> Result<Solution, SolveError> {
        solve(c, &LabelEnv::new(), &SolverOptions::default()).0
    }

    #[test]
    fn known_scrutinee_discharges() {
        let c = Constraint::exists(
            vec![v(0)],
            Constraint::and(Constraint::eq(Type::var(v(0)), Type::int()), wild(0, Constraint::True)),
        );
        assert!(run(&c).is_ok());
    }

    #[test]
    fn out_of_thin_air_is_ambiguous() {
        let c = Constraint::exists(vec![v(0)], wild(0, Constraint::eq(Type::var(v(0)), Type::int())));
        assert!(matches!(run(&c), Err(SolveError::Ambiguous(_))));
    }

    #[test]
    fn dependent_matches_discharge_in_order() {
        let c = Constraint::exists(
            vec![v(0), v(1)],
            Constraint::conj([
                wild(0, Constraint::eq(Type::var(v(1)), Type::bool())),
                wild(1, Constraint::True),
                Constraint::eq(Type::var(v(0)), Type::int()),
            ]),
        );
        assert!(run(&c).is_ok());
    }

    #[test]
    fn cyclic_matches_are_ambiguous() {
        let c = Constraint::exists(
            vec![v(0), v(1)],
            Constraint::and(
                wild(0, Constraint::eq(Type::var(v(1)), Type::bool())),
                wild(1, Constraint::eq(Type::var(v(0)), Type::int())),
            ),
        );
        match run(&c) {
            Err(SolveError::Ambiguous(stuck)) => assert_eq!(stuck.len(), 2),
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn let_generalizes_identity() {
        // let id = λa. ∃b. a = b → b in id ≤ int → int ∧ id ≤ bool → bool
        let def = Constraint::exists(
            vec![v(1)],
            Constraint::eq(Type::var(v(0)), Type::arrow(Type::var(v(1)), Type::var(v(1)))),
        );
        let body = Constraint::and(
            Constraint::App("id".into(), Type::arrow(Type::int(), Type::int())),
            Constraint::App("id".into(), Type::arrow(Type::bool(), Type::bool())),
        );
        let sol = run(&Constraint::let_("id", v(0), def, body)).unwrap();
        let s = sol.scheme_of("id").unwrap();
        assert_eq!(s.vars.len(), 1);
        assert_eq!(s.to_string(), "'a -> 'a");
    }

    #[test]
    fn monomorphic_let_variable_is_shared() {
        // ∃m. let f = λa. a = m in f ≤ int ∧ f ≤ bool
        let def = Constraint::eq(Type::var(v(1)), Type::var(v(0)));
        let body = Constraint::and(Constraint::App("f".into(), Type::int()), Constraint::App("f".into(), Type::bool()));
        let c = Constraint::exists(vec![v(0)], Constraint::let_("f", v(1), def, body));
        assert!(matches!(run(&c), Err(SolveError::Clash { .. })));
    }

    #[test]
    fn rigid_variable_cannot_escape() {
        let c = Constraint::exists(
            vec![v(0)],
            Constraint::forall(vec![v(1)], Constraint::eq(Type::var(v(0)), Type::var(v(1)))),
        );
        assert!(matches!(run(&c), Err(SolveError::Escape(_))));
    }

    #[test]
    fn partial_scheme_is_refined_by_backpropagation() {
        // let f = λa. ∃b. a = b → b ∧ match b { _ ⇒ True } in f ≤ int → int
        let def = Constraint::exists(
            vec![v(1)],
            Constraint::and(
                Constraint::eq(Type::var(v(0)), Type::arrow(Type::var(v(1)), Type::var(v(1)))),
                wild(1, Constraint::True),
            ),
        );
        let body = Constraint::App("f".into(), Type::arrow(Type::int(), Type::int()));
        let (res, report) = solve(&Constraint::let_("f", v(0), def, body), &LabelEnv::new(), &SolverOptions::default());
        let sol = res.unwrap();
        assert_eq!(sol.scheme_of("f").unwrap().to_string(), "int -> int");
        assert_eq!(report.stats.backprops, 1);
        assert!(report.solved_form);
    }

    #[test]
    fn match_count_never_increases() {
        let c = Constraint::exists(
            vec![v(0), v(1)],
            Constraint::conj([
                wild(0, wild(1, Constraint::True)),
                Constraint::eq(Type::var(v(1)), Type::bool()),
                Constraint::eq(Type::var(v(0)), Type::int()),
            ]),
        );
        let (res, report) = solve(&c, &LabelEnv::new(), &SolverOptions::default());
        assert!(res.is_ok());
        assert!(report.stats.match_counts.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(report.stats.match_counts.last(), Some(&0));
    }
}
