//! Surface syntax: terms, type expressions, programs, and their concrete text.

mod lexer;
mod parser;
mod pretty;

use std::fmt;

pub use parser::{parse_program, parse_scheme_text, ParseError};
pub use pretty::{print_program, print_term, print_type_expr};

/// Source position (1-based). Spans never participate in AST equality.
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Type expressions as written. Variables are named; closedness is checked by
/// the parser against declared flexible variables and enclosing binders.
#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    Var(String),
    Unit,
    Int,
    Bool,
    Float,
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    Tuple(Vec<TypeExpr>),
    Named(String, Vec<TypeExpr>),
    Poly(Vec<String>, Box<TypeExpr>),
}

/// A scheme expression `'a 'b. t`; no binders means a monomorphic scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeExpr {
    pub vars: Vec<String>,
    pub body: TypeExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    Var(String),
    UnitLit,
    IntLit(i64),
    BoolLit(bool),
    FloatLit(f64),
    Fun(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Let(String, Box<Term>, Box<Term>),
    Annot(Box<Term>, Vec<String>, TypeExpr),
    Tuple(Vec<Term>),
    /// `e.j`, 1-based.
    ProjImplicit(Box<Term>, usize),
    /// `e.(j/n)`, 1-based.
    ProjExplicit(Box<Term>, usize, usize),
    BoxImplicit(Box<Term>),
    BoxExplicit(Box<Term>, Vec<String>, SchemeExpr),
    UnboxImplicit(Box<Term>),
    UnboxExplicit(Box<Term>, Vec<String>, SchemeExpr),
    Record(Vec<(String, Term)>),
    RecordExplicit(String, Vec<(String, Term)>),
    FieldImplicit(Box<Term>, String),
    FieldExplicit(Box<Term>, String, String),
    Hole(Vec<Term>),
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Term {
        Term { kind, span }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|t| t.size()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&Term> {
        use TermKind::*;
        match &self.kind {
            Var(_) | UnitLit | IntLit(_) | BoolLit(_) | FloatLit(_) => vec![],
            Fun(_, b) => vec![b],
            App(a, b) | Let(_, a, b) => vec![a, b],
            Annot(e, ..)
            | ProjImplicit(e, _)
            | ProjExplicit(e, ..)
            | BoxImplicit(e)
            | BoxExplicit(e, ..)
            | UnboxImplicit(e)
            | UnboxExplicit(e, ..)
            | FieldImplicit(e, _)
            | FieldExplicit(e, ..) => vec![e],
            Tuple(es) | Hole(es) => es.iter().collect(),
            Record(fs) | RecordExplicit(_, fs) => fs.iter().map(|(_, e)| e).collect(),
        }
    }

    /// Free term variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match &self.kind {
            TermKind::Var(x) => {
                if !bound.contains(x) && !out.contains(x) {
                    out.push(x.clone());
                }
            }
            TermKind::Fun(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            TermKind::Let(x, def, body) => {
                def.collect_free(bound, out);
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub params: Vec<String>,
    pub fields: Vec<(String, TypeExpr)>,
    pub span: Span,
}

/// Expected outcome of a top-level binding, written `(*! accept : t *)`,
/// `(*! ambiguous *)` or `(*! error *)` after the binding.
#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    Accept(Option<String>),
    Ambiguous,
    TypeError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub name: String,
    pub term: Term,
    pub expect: Option<Expectation>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Type(TypeDecl),
    Let(Binding),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    pub fn bindings(&self) -> impl Iterator<Item = &Binding> {
        self.items.iter().filter_map(|i| match i {
            Item::Let(b) => Some(b),
            Item::Type(_) => None,
        })
    }
}
