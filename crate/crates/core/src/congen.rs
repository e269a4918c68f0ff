//! Constraint generation: `generate(e, τ)` is satisfiable exactly when `e`
//! has type `τ`. Every variable it binds is drawn fresh from the supply.

use std::collections::HashMap;

use thiserror::Error;

use crate::constraint::{Constraint as C, MetaVar, Origin, Pattern, RecordRef, SchemeRef};
use crate::surface::{SchemeExpr, Span, Term, TermKind, TypeExpr};
use crate::types::{LabelEnv, Scheme, TyVar, Type, VarSupply};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CongenError {
    #[error("{span}: unbound variable `{name}`")]
    UnboundVar { name: String, span: Span },
    #[error("{span}: unknown record type `{name}`")]
    UnknownRecord { name: String, span: Span },
    #[error("{span}: record type `{name}` expects {expected} arguments, got {found}")]
    RecordArity { name: String, expected: usize, found: usize, span: Span },
    #[error("{span}: unbound type variable '{name}")]
    UnboundTyVar { name: String, span: Span },
}

pub struct Generator<'a> {
    labels: &'a LabelEnv,
    pub supply: VarSupply,
    next_meta: u32,
    next_box: u32,
    scope: Vec<String>,
}

impl<'a> Generator<'a> {
    /// `globals` are term variables bound outside the generated constraint.
    pub fn new(labels: &'a LabelEnv, supply: VarSupply, globals: &[String]) -> Self {
        Generator { labels, supply, next_meta: 0, next_box: 0, scope: globals.to_vec() }
    }

    pub fn fresh(&mut self) -> TyVar {
        self.supply.fresh()
    }

    fn meta(&mut self) -> MetaVar {
        self.next_meta += 1;
        MetaVar(self.next_meta - 1)
    }

    pub fn generate(&mut self, e: &Term, t: &Type) -> Result<C, CongenError> {
        let span = e.span;
        Ok(match &e.kind {
            TermKind::Var(x) => {
                if !self.scope.contains(x) {
                    return Err(CongenError::UnboundVar { name: x.clone(), span });
                }
                C::App(x.clone(), t.clone())
            }
            TermKind::UnitLit => C::Eq(t.clone(), Type::Unit),
            TermKind::IntLit(_) => C::Eq(t.clone(), Type::int()),
            TermKind::BoolLit(_) => C::Eq(t.clone(), Type::bool()),
            TermKind::FloatLit(_) => C::Eq(t.clone(), Type::float()),
            TermKind::Fun(x, body) => {
                let (a, b, p) = (self.fresh(), self.fresh(), self.fresh());
                let body_c = self.with_var(x, |g| g.generate(body, &Type::var(b)))?;
                let param = C::let_(x.clone(), p, C::Eq(Type::var(p), Type::var(a)), body_c);
                C::exists(vec![a, b], C::and(param, C::Eq(t.clone(), Type::arrow(Type::var(a), Type::var(b)))))
            }
            TermKind::App(f, arg) => {
                let (a, b) = (self.fresh(), self.fresh());
                let cf = self.generate(f, &Type::var(b))?;
                let ca = self.generate(arg, &Type::var(a))?;
                C::exists(
                    vec![a, b],
                    C::conj([cf, ca, C::Eq(Type::var(b), Type::arrow(Type::var(a), t.clone()))]),
                )
            }
            TermKind::Let(x, def, body) => {
                let a = self.fresh();
                let cd = self.generate(def, &Type::var(a))?;
                let cb = self.with_var(x, |g| g.generate(body, t))?;
                C::let_(x.clone(), a, cd, cb)
            }
            TermKind::Annot(inner, flex, ty) => {
                let (vars, env) = self.flex_env(flex);
                let ty = self.type_of(ty, &env, span)?;
                let c = self.generate(inner, &ty)?;
                C::exists(vars, C::and(c, C::Eq(t.clone(), ty)))
            }
            TermKind::Tuple(es) => {
                let vars: Vec<TyVar> = es.iter().map(|_| self.fresh()).collect();
                let mut cs = vec![C::Eq(t.clone(), Type::Tuple(vars.iter().map(|v| Type::var(*v)).collect()))];
                for (e, v) in es.iter().zip(&vars) {
                    cs.push(self.generate(e, &Type::var(*v))?);
                }
                C::exists(vars, C::conj(cs))
            }
            TermKind::ProjExplicit(inner, j, n) => {
                let a = self.fresh();
                let vars: Vec<TyVar> = (0..*n).map(|_| self.fresh()).collect();
                let c = self.generate(inner, &Type::var(a))?;
                let tuple = Type::Tuple(vars.iter().map(|v| Type::var(*v)).collect());
                let mut bound = vec![a];
                bound.extend(&vars);
                C::exists(bound, C::conj([c, C::Eq(Type::var(a), tuple), C::Eq(t.clone(), Type::var(vars[j - 1]))]))
            }
            TermKind::ProjImplicit(inner, j) => {
                let (a, b) = (self.fresh(), self.fresh());
                let c = self.generate(inner, &Type::var(a))?;
                let m = C::match_(
                    Type::var(a),
                    vec![(Pattern::TupleProj(b, *j), C::Eq(t.clone(), Type::var(b)))],
                    Origin::new(span, format!("tuple projection .{j}")),
                );
                C::exists(vec![a], C::and(c, m))
            }
            TermKind::BoxExplicit(inner, flex, s) => {
                let (vars, env) = self.flex_env(flex);
                let c = self.generate_scheme(inner, s, &env, span)?;
                let poly = self.poly_of(s, &env, span)?;
                C::exists(vars, C::and(c, C::Eq(t.clone(), poly)))
            }
            TermKind::UnboxExplicit(inner, flex, s) => {
                let (mut vars, env) = self.flex_env(flex);
                let b = self.fresh();
                vars.push(b);
                let c = self.generate(inner, &Type::var(b))?;
                let poly = self.poly_of(s, &env, span)?;
                let scheme = match poly.clone() {
                    Type::Poly(s) => *s,
                    _ => unreachable!(),
                };
                C::exists(vars, C::conj([c, C::Eq(Type::var(b), poly), C::SchemeLeq(SchemeRef::Scheme(scheme), t.clone())]))
            }
            TermKind::UnboxImplicit(inner) => {
                let a = self.fresh();
                let c = self.generate(inner, &Type::var(a))?;
                let s = self.meta();
                let m = C::match_(
                    Type::var(a),
                    vec![(Pattern::PolyPat(s), C::SchemeLeq(SchemeRef::Meta(s), t.clone()))],
                    Origin::new(span, "polytype unboxing"),
                );
                C::exists(vec![a], C::and(c, m))
            }
            TermKind::BoxImplicit(inner) => {
                let a = self.fresh();
                self.next_box += 1;
                let x = format!("box%{}", self.next_box);
                let c = self.generate(inner, &Type::var(a))?;
                let s = self.meta();
                let m = C::match_(
                    t.clone(),
                    vec![(Pattern::PolyPat(s), C::AbsLeq(x.clone(), SchemeRef::Meta(s)))],
                    Origin::new(span, "polytype boxing"),
                );
                C::let_(x, a, c, m)
            }
            TermKind::FieldExplicit(inner, r, l) => {
                self.check_record(r, span)?;
                let a = self.fresh();
                let c = self.generate(inner, &Type::var(a))?;
                C::exists(vec![a], C::and(c, C::LabLeq(l.clone(), RecordRef::Name(r.clone()), Type::var(a), t.clone())))
            }
            TermKind::FieldImplicit(inner, l) => match self.labels.label_unique(l) {
                Some(r) => {
                    let r = r.to_string();
                    let a = self.fresh();
                    let c = self.generate(inner, &Type::var(a))?;
                    C::exists(vec![a], C::and(c, C::LabLeq(l.clone(), RecordRef::Name(r), Type::var(a), t.clone())))
                }
                None => {
                    let a = self.fresh();
                    let c = self.generate(inner, &Type::var(a))?;
                    let r = self.meta();
                    let m = C::match_(
                        Type::var(a),
                        vec![(Pattern::RecordPat(r), C::LabLeq(l.clone(), RecordRef::Meta(r), Type::var(a), t.clone()))],
                        Origin::new(span, format!("record projection .{l}")),
                    );
                    C::exists(vec![a], C::and(c, m))
                }
            },
            TermKind::RecordExplicit(r, fields) => {
                self.check_record(r, span)?;
                self.record(fields, RecordRef::Name(r.clone()), t, None)?
            }
            TermKind::Record(fields) => {
                let labels: Vec<String> = fields.iter().map(|(l, _)| l.clone()).collect();
                match self.labels.labels_unique(&labels) {
                    Some(r) => {
                        let r = r.to_string();
                        self.record(fields, RecordRef::Name(r), t, None)?
                    }
                    None => {
                        let r = self.meta();
                        let origin = Origin::new(span, format!("record literal {{{}}}", labels.join("; ")));
                        self.record(fields, RecordRef::Meta(r), t, Some((r, origin)))?
                    }
                }
            }
            TermKind::Hole(es) => {
                let vars: Vec<TyVar> = es.iter().map(|_| self.fresh()).collect();
                let mut cs = Vec::new();
                for (e, v) in es.iter().zip(&vars) {
                    cs.push(self.generate(e, &Type::var(*v))?);
                }
                C::exists(vars, C::conj(cs))
            }
        })
    }

    /// Record construction; with `suspend` the record name is found by a match
    /// on the expected type.
    fn record(
        &mut self,
        fields: &[(String, Term)],
        r: RecordRef,
        t: &Type,
        suspend: Option<(MetaVar, Origin)>,
    ) -> Result<C, CongenError> {
        let vars: Vec<TyVar> = fields.iter().map(|_| self.fresh()).collect();
        let mut cs = Vec::new();
        for ((_, e), v) in fields.iter().zip(&vars) {
            cs.push(self.generate(e, &Type::var(*v))?);
        }
        let labels: Vec<String> = fields.iter().map(|(l, _)| l.clone()).collect();
        let mut checks = vec![C::DomEq(r.clone(), labels)];
        for ((l, _), v) in fields.iter().zip(&vars) {
            checks.push(C::LabLeq(l.clone(), r.clone(), t.clone(), Type::var(*v)));
        }
        let checks = C::conj(checks);
        cs.push(match suspend {
            None => checks,
            Some((m, origin)) => C::match_(t.clone(), vec![(Pattern::RecordPat(m), checks)], origin),
        });
        Ok(C::exists(vars, C::conj(cs)))
    }

    /// `⟦e⟧(∀ᾱ.τ) = ∀ᾱ. ⟦e⟧τ`
    fn generate_scheme(
        &mut self,
        e: &Term,
        s: &SchemeExpr,
        env: &HashMap<String, TyVar>,
        span: Span,
    ) -> Result<C, CongenError> {
        let mut env = env.clone();
        let rigid: Vec<TyVar> = s.vars.iter().map(|_| self.fresh()).collect();
        for (n, v) in s.vars.iter().zip(&rigid) {
            env.insert(n.clone(), *v);
        }
        let body = self.type_of(&s.body, &env, span)?;
        let c = self.generate(e, &body)?;
        Ok(C::forall(rigid, c))
    }

    fn poly_of(&mut self, s: &SchemeExpr, env: &HashMap<String, TyVar>, span: Span) -> Result<Type, CongenError> {
        self.type_of(&TypeExpr::Poly(s.vars.clone(), Box::new(s.body.clone())), env, span)
    }

    fn flex_env(&mut self, flex: &[String]) -> (Vec<TyVar>, HashMap<String, TyVar>) {
        let vars: Vec<TyVar> = flex.iter().map(|_| self.fresh()).collect();
        let env = flex.iter().cloned().zip(vars.iter().copied()).collect();
        (vars, env)
    }

    fn with_var<T>(&mut self, x: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push(x.to_string());
        let r = f(self);
        self.scope.pop();
        r
    }

    fn check_record(&self, r: &str, span: Span) -> Result<(), CongenError> {
        match self.labels.record(r) {
            Some(_) => Ok(()),
            None => Err(CongenError::UnknownRecord { name: r.to_string(), span }),
        }
    }

    /// Translates a type expression; polytype binders get fresh names.
    pub fn type_of(&mut self, t: &TypeExpr, env: &HashMap<String, TyVar>, span: Span) -> Result<Type, CongenError> {
        Ok(match t {
            TypeExpr::Var(n) => match env.get(n) {
                Some(v) => Type::var(*v),
                None => return Err(CongenError::UnboundTyVar { name: n.clone(), span }),
            },
            TypeExpr::Unit => Type::Unit,
            TypeExpr::Int => Type::int(),
            TypeExpr::Bool => Type::bool(),
            TypeExpr::Float => Type::float(),
            TypeExpr::Arrow(a, b) => Type::arrow(self.type_of(a, env, span)?, self.type_of(b, env, span)?),
            TypeExpr::Tuple(ts) => {
                Type::Tuple(ts.iter().map(|t| self.type_of(t, env, span)).collect::<Result<_, _>>()?)
            }
            TypeExpr::Named(n, args) => {
                let expected =
                    self.labels.arity(n).ok_or_else(|| CongenError::UnknownRecord { name: n.clone(), span })?;
                if expected != args.len() {
                    return Err(CongenError::RecordArity { name: n.clone(), expected, found: args.len(), span });
                }
                Type::Record(n.clone(), args.iter().map(|t| self.type_of(t, env, span)).collect::<Result<_, _>>()?)
            }
            TypeExpr::Poly(vs, body) => {
                let mut inner = env.clone();
                let binders: Vec<TyVar> = vs.iter().map(|_| self.fresh()).collect();
                for (n, v) in vs.iter().zip(&binders) {
                    inner.insert(n.clone(), *v);
                }
                let body = self.type_of(body, &inner, span)?;
                Type::Poly(Box::new(Scheme { vars: binders, body }))
            }
        })
    }
}
