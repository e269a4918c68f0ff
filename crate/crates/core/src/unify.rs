//! Destructive unification over a union-find graph of shallow structures.
//!
//! Every class lives in a scope of a scope tree. A class's children never
//! live deeper than the class itself: merging moves the result to the lowest
//! common ancestor of the two scopes and lowers children accordingly. A rigid
//! variable belongs to a `∀` scope and may neither acquire structure, meet
//! another rigid variable, nor be lowered out of its scope.

use std::collections::HashMap;

use thiserror::Error;

use crate::types::{shape_apply, Shape, TyVar, Type};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ScopeId(pub u32);

impl NodeId {
    /// The variable naming this node when a type is read back.
    pub fn tyvar(self) -> TyVar {
        TyVar(self.0)
    }
}

#[derive(Clone, Debug)]
pub struct Structure {
    pub shape: Shape,
    pub children: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct Desc {
    pub structure: Option<Structure>,
    pub scope: ScopeId,
    /// The `∀` scope owning the rigid variable in this class, if any.
    pub rigid: Option<ScopeId>,
    /// Suspended match handles waiting for this class to get a shape.
    pub waiters: Vec<u32>,
    /// Instances that have this class in their source map.
    pub watchers: Vec<u32>,
}

#[derive(Clone, Debug)]
enum Slot {
    Link(NodeId),
    Rep(Box<Desc>),
}

#[derive(Clone, Debug)]
struct ScopeInfo {
    parent: Option<ScopeId>,
    depth: u32,
}

/// Changes other parts of the solver must react to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    /// `from` was linked into `into`; `scopes` are the two scopes before merging.
    Merged { into: NodeId, from: NodeId, scopes: [ScopeId; 2] },
    /// A structureless class acquired structure.
    Structured { node: NodeId, scope_before: ScopeId },
    /// A class moved to an ancestor scope.
    Lowered { node: NodeId, from: ScopeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("cannot unify {left} with {right}")]
    Clash { left: Box<Shape>, right: Box<Shape> },
    #[error("cyclic type")]
    Cycle { node: NodeId },
    #[error("rigid type variable cannot be unified with a {shape}")]
    RigidStructure { shape: Shape },
    #[error("two distinct rigid type variables cannot be unified")]
    RigidClash,
    #[error("rigid type variable escapes its scope")]
    Escape,
}

#[derive(Clone, Debug, Default)]
pub struct EngineStats {
    /// Merges of two distinct classes.
    pub merges: u64,
    /// Child pairs pushed by decomposition.
    pub decompositions: u64,
    /// Sum of `4 + 2·arity` over every structure created; bounds decompositions.
    pub weight_created: u64,
    pub lowerings: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Engine {
    slots: Vec<Slot>,
    scopes: Vec<ScopeInfo>,
    pub events: Vec<Event>,
    pub stats: EngineStats,
}

impl Engine {
    /// An engine with a single root scope, `ScopeId(0)`.
    pub fn new() -> Self {
        Engine { slots: Vec::new(), scopes: vec![ScopeInfo { parent: None, depth: 0 }], ..Default::default() }
    }

    pub fn root_scope(&self) -> ScopeId {
        ScopeId(0)
    }

    pub fn new_scope(&mut self, parent: ScopeId) -> ScopeId {
        let depth = self.scopes[parent.0 as usize].depth + 1;
        self.scopes.push(ScopeInfo { parent: Some(parent), depth });
        ScopeId(self.scopes.len() as u32 - 1)
    }

    pub fn parent(&self, s: ScopeId) -> Option<ScopeId> {
        self.scopes[s.0 as usize].parent
    }

    pub fn depth(&self, s: ScopeId) -> u32 {
        self.scopes[s.0 as usize].depth
    }

    pub fn lca(&self, mut a: ScopeId, mut b: ScopeId) -> ScopeId {
        while self.depth(a) > self.depth(b) {
            a = self.parent(a).unwrap();
        }
        while self.depth(b) > self.depth(a) {
            b = self.parent(b).unwrap();
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        a
    }

    /// Whether `s` is `ancestor` or one of its descendants.
    pub fn is_within(&self, mut s: ScopeId, ancestor: ScopeId) -> bool {
        let target = self.depth(ancestor);
        while self.depth(s) > target {
            s = self.parent(s).unwrap();
        }
        s == ancestor
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn push(&mut self, desc: Desc) -> NodeId {
        self.slots.push(Slot::Rep(Box::new(desc)));
        NodeId(self.slots.len() as u32 - 1)
    }

    pub fn fresh(&mut self, scope: ScopeId) -> NodeId {
        self.push(Desc { structure: None, scope, rigid: None, waiters: Vec::new(), watchers: Vec::new() })
    }

    pub fn fresh_rigid(&mut self, scope: ScopeId) -> NodeId {
        self.push(Desc { structure: None, scope, rigid: Some(scope), waiters: Vec::new(), watchers: Vec::new() })
    }

    /// A new class with the given structure. Children must not live deeper
    /// than `scope`; they are lowered if they do.
    pub fn structure(&mut self, shape: Shape, children: Vec<NodeId>, scope: ScopeId) -> Result<NodeId, UnifyError> {
        assert_eq!(shape.arity(), children.len());
        self.stats.weight_created += 4 + 2 * children.len() as u64;
        let children: Vec<NodeId> = children.into_iter().map(|c| self.find(c)).collect();
        for &c in &children {
            self.lower(c, scope)?;
        }
        Ok(self.push(Desc {
            structure: Some(Structure { shape, children }),
            scope,
            rigid: None,
            waiters: Vec::new(),
            watchers: Vec::new(),
        }))
    }

    pub fn find(&mut self, n: NodeId) -> NodeId {
        let mut root = n;
        while let Slot::Link(next) = &self.slots[root.0 as usize] {
            root = *next;
        }
        let mut cur = n;
        while let Slot::Link(next) = self.slots[cur.0 as usize].clone() {
            self.slots[cur.0 as usize] = Slot::Link(root);
            cur = next;
        }
        root
    }

    /// Representative without path compression.
    pub fn find_imm(&self, n: NodeId) -> NodeId {
        let mut root = n;
        while let Slot::Link(next) = &self.slots[root.0 as usize] {
            root = *next;
        }
        root
    }

    pub fn desc(&self, n: NodeId) -> &Desc {
        match &self.slots[self.find_imm(n).0 as usize] {
            Slot::Rep(d) => d,
            Slot::Link(_) => unreachable!(),
        }
    }

    pub fn desc_mut(&mut self, n: NodeId) -> &mut Desc {
        let r = self.find(n);
        match &mut self.slots[r.0 as usize] {
            Slot::Rep(d) => d,
            Slot::Link(_) => unreachable!(),
        }
    }

    pub fn scope(&self, n: NodeId) -> ScopeId {
        self.desc(n).scope
    }

    pub fn is_rep(&self, n: NodeId) -> bool {
        matches!(self.slots[n.0 as usize], Slot::Rep(_))
    }

    /// Moves the class of `n` (and, transitively, its children) up to the
    /// common ancestor of its scope and `target`.
    pub fn lower(&mut self, n: NodeId, target: ScopeId) -> Result<(), UnifyError> {
        let mut stack = vec![n];
        while let Some(n) = stack.pop() {
            let r = self.find(n);
            let from = self.scope(r);
            let to = self.lca(from, target);
            if to == from {
                continue;
            }
            let d = self.desc_mut(r);
            d.scope = to;
            if let Some(owner) = d.rigid {
                if !self.is_within(to, owner) {
                    return Err(UnifyError::Escape);
                }
            }
            self.stats.lowerings += 1;
            self.events.push(Event::Lowered { node: r, from });
            if let Some(s) = &self.desc(r).structure {
                stack.extend(s.children.iter().copied());
            }
        }
        Ok(())
    }

    /// Unifies two classes, recording events. On error the graph may be
    /// partially updated; callers treat any error as final.
    pub fn unify(&mut self, a: NodeId, b: NodeId) -> Result<(), UnifyError> {
        let mut stack = vec![(a, b)];
        let mut touched = Vec::new();
        while let Some((a, b)) = stack.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            self.stats.merges += 1;
            let da = self.take(ra);
            let db = self.take(rb);
            if da.rigid.is_some() && db.rigid.is_some() {
                return Err(UnifyError::RigidClash);
            }
            for (r, s) in [(&da, &db), (&db, &da)] {
                if r.rigid.is_some() {
                    if let Some(st) = &s.structure {
                        return Err(UnifyError::RigidStructure { shape: st.shape.clone() });
                    }
                }
            }
            let scope = self.lca(da.scope, db.scope);
            // The shallower class becomes the representative.
            let (into, from, keep, other) = if self.depth(db.scope) < self.depth(da.scope) {
                (rb, ra, db, da)
            } else {
                (ra, rb, da, db)
            };
            let scopes = [keep.scope, other.scope];
            let (structure, struct_scope, gained) = match (keep.structure, other.structure) {
                (Some(s1), Some(s2)) => {
                    if s1.shape != s2.shape {
                        return Err(UnifyError::Clash { left: Box::new(s1.shape), right: Box::new(s2.shape) });
                    }
                    self.stats.decompositions += s1.children.len() as u64;
                    for (x, y) in s1.children.iter().zip(&s2.children) {
                        stack.push((*x, *y));
                    }
                    (Some(s1), keep.scope, None)
                }
                (Some(s), None) => (Some(s), keep.scope, Some(other.scope)),
                (None, Some(s)) => (Some(s), other.scope, Some(keep.scope)),
                (None, None) => (None, scope, None),
            };
            let mut waiters = keep.waiters;
            waiters.extend(other.waiters);
            let mut watchers = keep.watchers;
            for w in other.watchers {
                if !watchers.contains(&w) {
                    watchers.push(w);
                }
            }
            let rigid = keep.rigid.or(other.rigid);
            if let Some(owner) = rigid {
                if !self.is_within(scope, owner) {
                    return Err(UnifyError::Escape);
                }
            }
            let children: Vec<NodeId> = structure.as_ref().map(|s| s.children.clone()).unwrap_or_default();
            self.slots[into.0 as usize] =
                Slot::Rep(Box::new(Desc { structure, scope, rigid, waiters, watchers }));
            self.slots[from.0 as usize] = Slot::Link(into);
            self.events.push(Event::Merged { into, from, scopes });
            if let Some(scope_before) = gained {
                self.events.push(Event::Structured { node: into, scope_before });
            }
            if struct_scope != scope {
                for c in children {
                    self.lower(c, scope)?;
                }
            }
            touched.push(into);
        }
        for t in touched {
            if self.reaches_itself(t) {
                return Err(UnifyError::Cycle { node: t });
            }
        }
        Ok(())
    }

    fn take(&mut self, r: NodeId) -> Desc {
        match &self.slots[r.0 as usize] {
            Slot::Rep(d) => (**d).clone(),
            Slot::Link(_) => unreachable!(),
        }
    }

    /// Whether the class of `n` occurs inside its own structure.
    pub fn reaches_itself(&mut self, n: NodeId) -> bool {
        let target = self.find(n);
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<NodeId> = self.children(target);
        while let Some(c) = stack.pop() {
            let c = self.find(c);
            if c == target {
                return true;
            }
            if seen.insert(c) {
                stack.extend(self.children(c));
            }
        }
        false
    }

    pub fn children(&self, n: NodeId) -> Vec<NodeId> {
        self.desc(n).structure.as_ref().map(|s| s.children.clone()).unwrap_or_default()
    }

    /// Reads a class back as a type; structureless classes become
    /// `Var(rep.tyvar())`. Cycles are cut with the variable of the class.
    pub fn read(&self, n: NodeId) -> Type {
        self.read_in(n, &mut Vec::new())
    }

    fn read_in(&self, n: NodeId, path: &mut Vec<NodeId>) -> Type {
        let r = self.find_imm(n);
        let d = self.desc(r);
        match &d.structure {
            None => Type::Var(r.tyvar()),
            Some(_) if path.contains(&r) => Type::Var(r.tyvar()),
            Some(s) => {
                path.push(r);
                let args: Vec<Type> = s.children.iter().map(|c| self.read_in(*c, path)).collect();
                path.pop();
                shape_apply(&s.shape, &args).expect("structure arity matches its shape")
            }
        }
    }

    /// Whether some class reaches itself through structure.
    pub fn is_cyclic(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color: HashMap<NodeId, u8> = HashMap::new();
        for i in 0..self.slots.len() {
            let n = NodeId(i as u32);
            if !self.is_rep(n) || color.contains_key(&n) {
                continue;
            }
            let mut stack = vec![(n, false)];
            while let Some((m, exit)) = stack.pop() {
                if exit {
                    color.insert(m, 2);
                    continue;
                }
                match color.get(&m) {
                    Some(1) => return true,
                    Some(_) => continue,
                    None => {}
                }
                color.insert(m, 1);
                stack.push((m, true));
                for c in self.children(m) {
                    let c = self.find_imm(c);
                    match color.get(&c) {
                        Some(1) => return true,
                        Some(_) => {}
                        None => stack.push((c, false)),
                    }
                }
            }
        }
        false
    }

    /// Solved form: acyclic, one structure per class (by construction),
    /// children no deeper than their parent, rigid classes structureless
    /// and inside their scope.
    pub fn solved_form(&self) -> bool {
        if self.is_cyclic() {
            return false;
        }
        (0..self.slots.len()).all(|i| {
            let n = NodeId(i as u32);
            if !self.is_rep(n) {
                return true;
            }
            let d = self.desc(n);
            let rigid_ok = match d.rigid {
                Some(owner) => d.structure.is_none() && self.is_within(d.scope, owner),
                None => true,
            };
            let children_ok = d.structure.as_ref().is_none_or(|s| {
                s.shape.arity() == s.children.len()
                    && s.children.iter().all(|c| self.is_within(d.scope, self.scope(*c)))
            });
            rigid_ok && children_ok
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{canonical_shape, decompose};

    fn build(g: &mut Engine, t: &Type, vars: &mut HashMap<TyVar, NodeId>) -> NodeId {
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

    #[test]
    fn occurs_check_rejects_self_arrow() {
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let a = TyVar(0);
        let na = build(&mut g, &Type::var(a), &mut vars);
        let arr = build(&mut g, &Type::arrow(Type::var(a), Type::var(a)), &mut vars);
        assert!(matches!(g.unify(na, arr), Err(UnifyError::Cycle { .. })));
    }

    #[test]
    fn clash_after_binding() {
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let a = build(&mut g, &Type::var(TyVar(0)), &mut vars);
        let i = build(&mut g, &Type::int(), &mut vars);
        let b = build(&mut g, &Type::bool(), &mut vars);
        g.unify(a, i).unwrap();
        assert!(matches!(g.unify(a, b), Err(UnifyError::Clash { .. })));
    }

    #[test]
    fn polytypes_unify_up_to_renaming() {
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let (x, y) = (TyVar(10), TyVar(11));
        let p1 = Type::poly(vec![x], Type::arrow(Type::var(x), Type::var(x)));
        let p2 = Type::poly(vec![y], Type::arrow(Type::var(y), Type::var(y)));
        let p3 = Type::poly(vec![y], Type::arrow(Type::var(y), Type::int()));
        let (n1, n2, n3) = (build(&mut g, &p1, &mut vars), build(&mut g, &p2, &mut vars), build(&mut g, &p3, &mut vars));
        assert!(g.unify(n1, n2).is_ok());
        assert!(matches!(g.unify(n1, n3), Err(UnifyError::Clash { .. })));
    }

    #[test]
    fn unify_is_idempotent() {
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let a = build(&mut g, &Type::var(TyVar(0)), &mut vars);
        let t = build(&mut g, &Type::arrow(Type::int(), Type::var(TyVar(1))), &mut vars);
        g.unify(a, t).unwrap();
        g.events.clear();
        g.unify(a, t).unwrap();
        assert!(g.events.is_empty());
        assert!(g.solved_form());
    }

    #[test]
    fn merging_lowers_children_to_the_common_scope() {
        let mut g = Engine::new();
        let root = g.root_scope();
        let inner = g.new_scope(root);
        let outer_var = g.fresh(root);
        let child = g.fresh(inner);
        let sh = canonical_shape(&Type::Tuple(vec![Type::int(), Type::int()])).unwrap();
        let pair = g.structure(sh, vec![child, child], inner).unwrap();
        g.unify(outer_var, pair).unwrap();
        assert_eq!(g.scope(child), root);
        assert!(g.solved_form());
    }

    #[test]
    fn rigid_escape_is_detected() {
        let mut g = Engine::new();
        let root = g.root_scope();
        let f = g.new_scope(root);
        let outer = g.fresh(root);
        let rigid = g.fresh_rigid(f);
        assert_eq!(g.unify(outer, rigid), Err(UnifyError::Escape));
    }

    #[test]
    fn rigid_rejects_structure() {
        let mut g = Engine::new();
        let root = g.root_scope();
        let f = g.new_scope(root);
        let rigid = g.fresh_rigid(f);
        let i = g.structure(canonical_shape(&Type::int()).unwrap(), vec![], f).unwrap();
        assert!(matches!(g.unify(rigid, i), Err(UnifyError::RigidStructure { .. })));
    }

    #[test]
    fn cyclic_pair_is_reported() {
        // α = β → γ, β = α
        let mut g = Engine::new();
        let mut vars = HashMap::new();
        let a = build(&mut g, &Type::var(TyVar(0)), &mut vars);
        let arr = build(&mut g, &Type::arrow(Type::var(TyVar(1)), Type::var(TyVar(2))), &mut vars);
        g.unify(a, arr).unwrap();
        let b = vars[&TyVar(1)];
        assert!(g.unify(b, a).is_err());
    }
}
