//! Checking whole programs: record declarations, top-level bindings and
//! their expected outcomes.
//!
//! Each binding is solved on its own. Builtins and earlier accepted bindings
//! it mentions are bound around it as `let`s whose definitions pin the stored
//! scheme, and record types declared before it are in scope.

use std::collections::HashMap;

use thiserror::Error;

use crate::congen::{CongenError, Generator};
use crate::constraint::{show_constraint, Constraint};
use crate::oracle::{GroundUniverse, Oracle, OracleError};
use crate::solver::{solve, LetScheme, SolveError, SolverOptions, Stats, StuckMatch};
use crate::surface::{parse_program, parse_scheme_text, Binding, Expectation, Item, ParseError, Program, SchemeExpr};
use crate::surface::{Term, TermKind, TypeDecl, TypeExpr};
use crate::types::{is_instance, LabelEnv, LabelEnvError, RecordDecl, Scheme, TyVar, Type, VarSupply};

/// Builtin values, available unless shadowed by a binding.
pub const BUILTINS: &[(&str, &str)] = &[
    ("+", "int -> int -> int"),
    ("app", "('a -> 'b) -> 'a -> 'b"),
    ("rev_app", "'a -> ('a -> 'b) -> 'b"),
    ("ite", "bool -> 'a -> 'a -> 'a"),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("{span}: {source}")]
    Declaration { span: crate::surface::Span, source: LabelEnvError },
    #[error("{span}: {message}")]
    Type { span: crate::surface::Span, message: String },
}

#[derive(Clone, Debug, Default)]
pub struct DriverOptions {
    pub solver: SolverOptions,
    pub emit_constraints: bool,
    /// Cross-check each binding against the semantic oracle over a universe
    /// of this depth.
    pub oracle_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Accepted(Scheme),
    Ambiguous(Vec<StuckMatch>),
    TypeError(String),
    /// Unbound names and malformed annotations.
    ScopeError(String),
    Internal(String),
}

impl Outcome {
    /// Exit code when this outcome fails its binding's expectation.
    fn code(&self) -> i32 {
        match self {
            Outcome::Accepted(_) | Outcome::TypeError(_) => 1,
            Outcome::Ambiguous(_) => 2,
            Outcome::ScopeError(_) => 3,
            Outcome::Internal(_) => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleVerdict {
    Agrees { typings: usize },
    Disagrees(String),
    Skipped(String),
}

#[derive(Clone, Debug)]
pub struct BindingReport {
    pub name: String,
    pub span: crate::surface::Span,
    pub outcome: Outcome,
    pub expect: Option<Expectation>,
    /// `None` when met; otherwise why not.
    pub unmet: Option<String>,
    /// Schemes of `let`s written inside the binding.
    pub nested: Vec<LetScheme>,
    pub constraint: Option<String>,
    /// Node count of the solved constraint, wrappers included.
    pub constraint_size: usize,
    pub trace: Vec<String>,
    pub stats: Stats,
    pub solved_form: bool,
    pub oracle: Option<OracleVerdict>,
}

impl BindingReport {
    /// The `name : …` result line.
    pub fn line(&self) -> String {
        match &self.outcome {
            Outcome::Accepted(s) => format!("{} : {s}", self.name),
            Outcome::Ambiguous(stuck) => {
                let what = stuck.first().map(|s| s.origin.what.as_str()).unwrap_or("match");
                format!("{} : ambiguous {what}", self.name)
            }
            Outcome::TypeError(m) | Outcome::ScopeError(m) => format!("{} : error {m}", self.name),
            Outcome::Internal(m) => format!("{} : internal error {m}", self.name),
        }
    }

    /// Details for a failed binding, such as the source positions of stuck
    /// matches.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Outcome::Ambiguous(stuck) = &self.outcome {
            for s in stuck {
                out.push(format!(
                    "{}: {}: cannot determine the type of {} (scrutinee {})",
                    self.name, s.origin.span, s.origin.what, s.scrutinee
                ));
            }
        }
        if let Some(why) = &self.unmet {
            out.push(format!("{}: {}: {why}", self.name, self.span));
        }
        if let Some(OracleVerdict::Disagrees(why)) = &self.oracle {
            out.push(format!("{}: oracle disagrees: {why}", self.name));
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub bindings: Vec<BindingReport>,
}

impl CheckReport {
    /// 0 when every binding meets its expectation; 4 on an internal error or
    /// oracle disagreement; otherwise the code of the first unmet binding.
    pub fn exit_code(&self) -> i32 {
        let internal = self.bindings.iter().any(|b| {
            matches!(b.outcome, Outcome::Internal(_)) || matches!(b.oracle, Some(OracleVerdict::Disagrees(_)))
        });
        if internal {
            return 4;
        }
        self.bindings.iter().find(|b| b.unmet.is_some()).map_or(0, |b| b.outcome.code())
    }
}

pub fn check_source(src: &str, opts: &DriverOptions) -> Result<CheckReport, DriverError> {
    check_program(&parse_program(src)?, opts)
}

pub fn check_program(p: &Program, opts: &DriverOptions) -> Result<CheckReport, DriverError> {
    let mut labels = LabelEnv::new();
    let mut env: HashMap<String, Option<Scheme>> = HashMap::new();
    let mut report = CheckReport::default();
    for item in &p.items {
        match item {
            Item::Type(d) => {
                let decl = record_decl(d, &labels)?;
                labels.declare(decl).map_err(|source| DriverError::Declaration { span: d.span, source })?;
            }
            Item::Let(b) => {
                let r = check_binding(b, &labels, &env, opts);
                let scheme = match &r.outcome {
                    Outcome::Accepted(s) => Some(s.clone()),
                    _ => None,
                };
                env.insert(b.name.clone(), scheme);
                report.bindings.push(r);
            }
        }
    }
    Ok(report)
}

/// The constraint for one binding together with what is needed to read its
/// result back.
pub struct BindingConstraint {
    /// `let`-wrapped form solved by the solver.
    pub constraint: Constraint,
    /// Index of the binding's own `let` among the solution's lets.
    pub index: usize,
    /// The same constraint with the binding's type left as the free
    /// variable `root`, for the oracle.
    pub open: Constraint,
    pub root: TyVar,
}

/// Generates the constraint for `name = term`. `prior` gives the schemes of
/// earlier bindings; `None` marks a binding that was rejected.
pub fn binding_constraint(
    name: &str,
    term: &Term,
    labels: &LabelEnv,
    prior: &HashMap<String, Option<Scheme>>,
) -> Result<BindingConstraint, String> {
    let mut wrappers: Vec<(String, Scheme)> = Vec::new();
    for x in term.free_vars() {
        match prior.get(&x) {
            Some(Some(s)) => wrappers.push((x, s.clone())),
            Some(None) => return Err(format!("uses rejected binding `{x}`")),
            None => match builtin_scheme(&x) {
                Some(s) => wrappers.push((x, s)),
                None => return Err(format!("unbound variable `{x}`")),
            },
        }
    }
    let globals: Vec<String> = wrappers.iter().map(|(x, _)| x.clone()).collect();
    let mut g = Generator::new(labels, VarSupply::new(), &globals);
    let root = g.fresh();
    let body = g.generate(term, &Type::var(root)).map_err(|e: CongenError| e.to_string())?;
    let mut closed = Constraint::let_(name, root, body.clone(), Constraint::True);
    let mut open = body;
    for (x, s) in wrappers.iter().rev() {
        let v = g.fresh();
        let fresh: Vec<TyVar> = s.vars.iter().map(|_| g.fresh()).collect();
        let mut map: HashMap<TyVar, Type> = s.vars.iter().copied().zip(fresh.iter().map(|f| Type::var(*f))).collect();
        // Any variable left free in a stored scheme is renamed apart too.
        for w in s.free_vars() {
            map.insert(w, Type::var(g.fresh()));
        }
        let def = Constraint::exists(fresh, Constraint::eq(s.body.subst(&map), Type::var(v)));
        closed = Constraint::let_(x.clone(), v, def.clone(), closed);
        open = Constraint::let_(x.clone(), v, def, open);
    }
    Ok(BindingConstraint { constraint: closed, index: wrappers.len(), open, root })
}

fn builtin_scheme(name: &str) -> Option<Scheme> {
    let (_, text) = BUILTINS.iter().find(|(n, _)| *n == name)?;
    let expr = parse_scheme_text(text, &[]).expect("builtin schemes parse");
    Some(scheme_of_expr(&expr, &LabelEnv::new()).expect("builtin schemes are well formed"))
}

/// Converts a parsed scheme; every listed variable is quantified.
pub fn scheme_of_expr(s: &SchemeExpr, labels: &LabelEnv) -> Result<Scheme, String> {
    let mut supply = VarSupply::new();
    let vars: HashMap<String, TyVar> = s.vars.iter().map(|v| (v.clone(), supply.fresh())).collect();
    let body = lower_type(&s.body, &vars, &mut supply, &|n| labels.arity(n))?;
    let order = s.vars.iter().map(|v| vars[v]).collect();
    Ok(Scheme::new(order, body).normalize())
}

fn lower_type(
    t: &TypeExpr,
    vars: &HashMap<String, TyVar>,
    supply: &mut VarSupply,
    arity: &dyn Fn(&str) -> Option<usize>,
) -> Result<Type, String> {
    Ok(match t {
        TypeExpr::Var(n) => Type::var(*vars.get(n).ok_or_else(|| format!("unbound type variable '{n}"))?),
        TypeExpr::Unit => Type::Unit,
        TypeExpr::Int => Type::int(),
        TypeExpr::Bool => Type::bool(),
        TypeExpr::Float => Type::float(),
        TypeExpr::Arrow(a, b) => Type::arrow(lower_type(a, vars, supply, arity)?, lower_type(b, vars, supply, arity)?),
        TypeExpr::Tuple(ts) => {
            Type::Tuple(ts.iter().map(|t| lower_type(t, vars, supply, arity)).collect::<Result<_, _>>()?)
        }
        TypeExpr::Named(n, args) => {
            let expected = arity(n).ok_or_else(|| format!("unknown record type `{n}`"))?;
            if expected != args.len() {
                return Err(format!("record type `{n}` expects {expected} arguments, got {}", args.len()));
            }
            let args = args.iter().map(|t| lower_type(t, vars, supply, arity)).collect::<Result<_, _>>()?;
            Type::Record(n.clone(), args)
        }
        TypeExpr::Poly(vs, body) => {
            let mut inner = vars.clone();
            let binders: Vec<TyVar> = vs.iter().map(|_| supply.fresh()).collect();
            inner.extend(vs.iter().cloned().zip(binders.iter().copied()));
            Type::poly(binders, lower_type(body, &inner, supply, arity)?)
        }
    })
}

fn record_decl(d: &TypeDecl, labels: &LabelEnv) -> Result<RecordDecl, DriverError> {
    let mut supply = VarSupply::new();
    let vars: HashMap<String, TyVar> = d.params.iter().map(|p| (p.clone(), supply.fresh())).collect();
    let own = (d.name.clone(), d.params.len());
    let arity = |n: &str| if n == own.0 { Some(own.1) } else { labels.arity(n) };
    let mut fields = Vec::new();
    for (l, t) in &d.fields {
        let t = lower_type(t, &vars, &mut supply, &arity)
            .map_err(|message| DriverError::Type { span: d.span, message })?;
        fields.push((l.clone(), t));
    }
    let params = d.params.iter().map(|p| vars[p]).collect();
    Ok(RecordDecl { name: d.name.clone(), params, fields })
}

fn let_names(t: &Term, out: &mut Vec<String>) {
    if let TermKind::Let(x, ..) = &t.kind {
        out.push(x.clone());
    }
    for c in t.children() {
        let_names(c, out);
    }
}

fn check_binding(
    b: &Binding,
    labels: &LabelEnv,
    prior: &HashMap<String, Option<Scheme>>,
    opts: &DriverOptions,
) -> BindingReport {
    let mut r = BindingReport {
        name: b.name.clone(),
        span: b.span,
        outcome: Outcome::Internal(String::new()),
        expect: b.expect.clone(),
        unmet: None,
        nested: Vec::new(),
        constraint: None,
        constraint_size: 0,
        trace: Vec::new(),
        stats: Stats::default(),
        solved_form: true,
        oracle: None,
    };
    let bc = match binding_constraint(&b.name, &b.term, labels, prior) {
        Ok(bc) => bc,
        Err(m) => {
            r.outcome = Outcome::ScopeError(m);
            r.unmet = unmet(&r.outcome, &b.expect, labels);
            return r;
        }
    };
    r.constraint_size = bc.constraint.size();
    if opts.emit_constraints {
        r.constraint = Some(show_constraint(&bc.constraint));
    }
    let (result, rep) = solve(&bc.constraint, labels, &opts.solver);
    r.trace = rep.trace;
    r.stats = rep.stats;
    r.solved_form = rep.solved_form;
    r.outcome = match result {
        Ok(sol) => {
            let mut names = Vec::new();
            let_names(&b.term, &mut names);
            r.nested = sol.lets[bc.index + 1..].iter().filter(|l| names.contains(&l.name)).cloned().collect();
            if !rep.solved_form {
                Outcome::Internal("final graph is not in solved form".to_string())
            } else {
                Outcome::Accepted(sol.lets[bc.index].scheme.clone())
            }
        }
        Err(SolveError::Ambiguous(stuck)) => Outcome::Ambiguous(stuck),
        Err(SolveError::Internal(m)) => Outcome::Internal(m),
        Err(e) => Outcome::TypeError(e.to_string()),
    };
    if let Some(depth) = opts.oracle_depth {
        let u = GroundUniverse::for_labels(labels, depth);
        r.oracle = Some(oracle_verdict(&bc, &r.outcome, labels, &u));
    }
    r.unmet = unmet(&r.outcome, &b.expect, labels);
    r
}

fn oracle_verdict(bc: &BindingConstraint, outcome: &Outcome, labels: &LabelEnv, u: &GroundUniverse) -> OracleVerdict {
    let oracle = Oracle::new(labels);
    let analysis = match oracle.analyze(&bc.open, bc.root) {
        Ok(a) => a,
        Err(OracleError::Budget(m)) => return OracleVerdict::Skipped(m),
    };
    let typings = analysis.ground_typings(u);
    match outcome {
        Outcome::Accepted(s) => {
            if !analysis.typable() {
                return OracleVerdict::Disagrees("solver accepts an untypable binding".to_string());
            }
            if let Some(g) = typings.iter().find(|g| !is_instance(s, g)) {
                return OracleVerdict::Disagrees(format!("typing {g} is not an instance of {s}"));
            }
            if let Some(g) = u.types().iter().find(|g| is_instance(s, g) && !typings.contains(g)) {
                return OracleVerdict::Disagrees(format!("instance {g} of {s} is not a typing"));
            }
            OracleVerdict::Agrees { typings: typings.len() }
        }
        Outcome::Ambiguous(_) | Outcome::TypeError(_) => {
            if analysis.typable() {
                OracleVerdict::Disagrees("solver rejects a typable binding".to_string())
            } else {
                OracleVerdict::Agrees { typings: 0 }
            }
        }
        Outcome::ScopeError(m) | Outcome::Internal(m) => OracleVerdict::Skipped(m.clone()),
    }
}

fn unmet(outcome: &Outcome, expect: &Option<Expectation>, labels: &LabelEnv) -> Option<String> {
    let kind = match outcome {
        Outcome::Accepted(_) => "accepted",
        Outcome::Ambiguous(_) => "ambiguous",
        _ => "rejected",
    };
    match (expect, outcome) {
        (None | Some(Expectation::Accept(None)), Outcome::Accepted(_)) => None,
        (None | Some(Expectation::Accept(None)), _) => Some(format!("expected acceptance, got {kind}")),
        (Some(Expectation::Accept(Some(text))), Outcome::Accepted(s)) => {
            let records: Vec<(String, usize)> =
                labels.records().map(|d| (d.name.clone(), d.params.len())).collect();
            let expected = match parse_scheme_text(text, &records).map_err(|e| e.to_string()) {
                Ok(e) => scheme_of_expr(&e, labels),
                Err(e) => Err(e),
            };
            match expected {
                Err(e) => Some(format!("cannot read expected type `{text}`: {e}")),
                Ok(e) if e.alpha_eq(&s.normalize()) => None,
                Ok(e) => Some(format!("expected {e}, got {s}")),
            }
        }
        (Some(Expectation::Accept(Some(text))), _) => Some(format!("expected {text}, got {kind}")),
        (Some(Expectation::Ambiguous), Outcome::Ambiguous(_)) => None,
        (Some(Expectation::Ambiguous), _) => Some(format!("expected ambiguity, got {kind}")),
        (Some(Expectation::TypeError), Outcome::TypeError(_)) => None,
        (Some(Expectation::TypeError), _) => Some(format!("expected a type error, got {kind}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> CheckReport {
        check_source(src, &DriverOptions::default()).unwrap()
    }

    #[test]
    fn builtins_are_polymorphic() {
        let r = run("let f = app (fun x -> x + 1) 2\nlet g = ite true app rev_app");
        assert_eq!(r.bindings[0].line(), "f : int");
        assert!(matches!(r.bindings[1].outcome, Outcome::TypeError(_)));
    }

    #[test]
    fn prior_bindings_are_generalized() {
        let r = run("let id x = x\nlet p = (id 1, id true)");
        assert_eq!(r.bindings[0].line(), "id : 'a -> 'a");
        assert_eq!(r.bindings[1].line(), "p : int * bool");
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn expectations_drive_the_exit_code() {
        let r = run("let a = 1\n(*! accept : bool *)");
        assert_eq!(r.exit_code(), 1);
        let r = run("let a = 1 true\n(*! error *)");
        assert_eq!(r.exit_code(), 0);
        let r = run("let a = y");
        assert_eq!(r.exit_code(), 3);
    }

    #[test]
    fn records_are_scoped_by_position() {
        let r = run("let a = {x = 1}\ntype p = { x : int }\nlet b = {x = 1}");
        assert!(r.bindings[0].unmet.is_some());
        assert_eq!(r.bindings[1].line(), "b : p");
    }
}
