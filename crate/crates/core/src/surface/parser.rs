use std::collections::HashMap;

use thiserror::Error;

use super::lexer::{lex, Tok};
use super::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        ParseError { line: span.line, col: span.col, message: message.into() }
    }
}

type PResult<T> = Result<T, ParseError>;

/// A function parameter with its optional `(flexible variables, type)` annotation.
type Param = (String, Option<(Vec<String>, TypeExpr)>, Span);

/// Record names known to the parser: arity and labels.
type Records = HashMap<String, (usize, Vec<String>)>;

pub fn parse_program(src: &str) -> PResult<Program> {
    let mut p = Parser { toks: lex(src)?, pos: 0, records: Records::new() };
    let mut items = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Type => items.push(Item::Type(p.type_decl()?)),
            Tok::Let => items.push(Item::Let(p.binding()?)),
            Tok::Expect(_) => return Err(p.error("expectation comment must follow a binding")),
            other => {
                let msg = format!("expected `type` or `let`, found {}", other.describe());
                return Err(p.error(msg));
            }
        }
    }
    Ok(Program { items })
}

/// Parses `t` or `'a 'b. t` where every free type variable is implicitly
/// quantified; record names are checked against `records` (name, arity).
pub fn parse_scheme_text(src: &str, records: &[(String, usize)]) -> PResult<SchemeExpr> {
    let recs = records.iter().map(|(n, a)| (n.clone(), (*a, Vec::new()))).collect();
    let mut p = Parser { toks: lex(src)?, pos: 0, records: recs };
    let mut vars = p.binder_prefix();
    let body = p.ty(&mut Scope::Open(&mut vars))?;
    p.expect(Tok::Eof)?;
    Ok(SchemeExpr { vars, body })
}

/// Type variables allowed in a type expression.
enum Scope<'a> {
    Closed(Vec<String>),
    /// Any variable is allowed and recorded on first occurrence.
    Open(&'a mut Vec<String>),
}

impl Scope<'_> {
    fn check(&mut self, name: &str, span: Span) -> PResult<()> {
        match self {
            Scope::Closed(vs) if vs.iter().any(|v| v == name) => Ok(()),
            Scope::Closed(_) => Err(ParseError::new(span, format!("undeclared type variable '{name}"))),
            Scope::Open(vs) => {
                if !vs.iter().any(|v| v == name) {
                    vs.push(name.to_string());
                }
                Ok(())
            }
        }
    }

    fn push(&mut self, names: &[String]) {
        if let Scope::Closed(vs) = self {
            vs.extend(names.iter().cloned());
        }
    }

    fn pop(&mut self, n: usize) {
        if let Scope::Closed(vs) = self {
            vs.truncate(vs.len() - n);
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    records: Records,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.span(), msg)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", t.describe(), self.peek().describe())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error(format!("expected an identifier, found {}", other.describe()))),
        }
    }

    fn tyvar(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::TyVar(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error(format!("expected a type variable, found {}", other.describe()))),
        }
    }

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        let span = self.span();
        self.expect(Tok::Type)?;
        let mut params = Vec::new();
        if let Tok::TyVar(_) = self.peek() {
            params.push(self.tyvar()?);
        } else if self.eat(&Tok::LParen) {
            params.push(self.tyvar()?);
            while self.eat(&Tok::Comma) {
                params.push(self.tyvar()?);
            }
            self.expect(Tok::RParen)?;
        }
        let name = self.ident()?;
        if self.records.contains_key(&name) {
            return Err(ParseError::new(span, format!("record type `{name}` is declared twice")));
        }
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        // The record may mention itself.
        self.records.insert(name.clone(), (params.len(), Vec::new()));
        let mut fields: Vec<(String, TypeExpr)> = Vec::new();
        loop {
            let fspan = self.span();
            let label = self.ident()?;
            if fields.iter().any(|(l, _)| *l == label) {
                self.records.remove(&name);
                return Err(ParseError::new(fspan, format!("duplicate field label `{label}`")));
            }
            self.expect(Tok::Colon)?;
            let ty = self.ty(&mut Scope::Closed(params.clone()))?;
            fields.push((label, ty));
            if !self.eat(&Tok::Semi) || self.peek() == &Tok::RBrace {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        let labels = fields.iter().map(|(l, _)| l.clone()).collect();
        self.records.insert(name.clone(), (params.len(), labels));
        Ok(TypeDecl { name, params, fields, span })
    }

    fn binding(&mut self) -> PResult<Binding> {
        let span = self.span();
        self.expect(Tok::Let)?;
        let name = self.ident()?;
        let term = self.let_rhs(span)?;
        let expect = match self.peek().clone() {
            Tok::Expect(body) => {
                let espan = self.span();
                self.advance();
                Some(parse_expectation(&body).ok_or_else(|| {
                    ParseError::new(espan, "expectation must be `accept`, `accept : <type>`, `ambiguous` or `error`")
                })?)
            }
            _ => None,
        };
        Ok(Binding { name, term, expect, span })
    }

    /// `params* (: annot)? = expr`, desugared to nested functions.
    fn let_rhs(&mut self, span: Span) -> PResult<Term> {
        let params = self.params()?;
        let ret = if self.eat(&Tok::Colon) { Some(self.annot()?) } else { None };
        self.expect(Tok::Eq)?;
        let mut body = self.expr()?;
        if let Some((flex, ty)) = ret {
            let s = body.span;
            body = Term::new(TermKind::Annot(Box::new(body), flex, ty), s);
        }
        Ok(wrap_params(params, body, span))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        loop {
            let span = self.span();
            match self.peek() {
                Tok::Ident(_) => params.push((self.ident()?, None, span)),
                Tok::LParen if matches!(self.peek_at(1), Tok::Ident(_)) && self.peek_at(2) == &Tok::Colon => {
                    self.advance();
                    let x = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let annot = self.annot()?;
                    self.expect(Tok::RParen)?;
                    params.push((x, Some(annot), span));
                }
                _ => return Ok(params),
            }
        }
    }

    /// `('a+ .)? type`; the listed variables are the flexible ones.
    fn annot(&mut self) -> PResult<(Vec<String>, TypeExpr)> {
        let flex = self.binder_prefix();
        let ty = self.ty(&mut Scope::Closed(flex.clone()))?;
        Ok((flex, ty))
    }

    /// Consumes `'a 'b .` when present.
    fn binder_prefix(&mut self) -> Vec<String> {
        let mut k = 0;
        while matches!(self.peek_at(k), Tok::TyVar(_)) {
            k += 1;
        }
        if k == 0 || self.peek_at(k) != &Tok::Dot {
            return Vec::new();
        }
        let vars = (0..k)
            .map(|_| match self.advance() {
                Tok::TyVar(s) => s,
                _ => unreachable!(),
            })
            .collect();
        self.advance();
        vars
    }

    /// `(exists 'a+ .)? scheme` inside box and unbox annotations.
    fn box_annot(&mut self) -> PResult<(Vec<String>, SchemeExpr)> {
        let mut flex = Vec::new();
        if self.eat(&Tok::Exists) {
            flex.push(self.tyvar()?);
            while let Tok::TyVar(_) = self.peek() {
                flex.push(self.tyvar()?);
            }
            self.expect(Tok::Dot)?;
        }
        let vars = self.binder_prefix();
        let mut scope: Vec<String> = flex.clone();
        scope.extend(vars.iter().cloned());
        let body = self.ty(&mut Scope::Closed(scope))?;
        Ok((flex, SchemeExpr { vars, body }))
    }

    fn expr(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek() {
            Tok::Fun => {
                self.advance();
                let params = self.params()?;
                if params.is_empty() {
                    return Err(self.error("expected a parameter after `fun`"));
                }
                self.expect(Tok::Arrow)?;
                let body = self.expr()?;
                Ok(wrap_params(params, body, span))
            }
            Tok::Let => {
                self.advance();
                let name = self.ident()?;
                let def = self.let_rhs(span)?;
                self.expect(Tok::In)?;
                let body = self.expr()?;
                Ok(Term::new(TermKind::Let(name, Box::new(def), Box::new(body)), span))
            }
            _ => self.sum(),
        }
    }

    fn sum(&mut self) -> PResult<Term> {
        let mut lhs = self.app()?;
        while self.peek() == &Tok::Plus {
            let span = self.span();
            self.advance();
            let rhs = self.app()?;
            let plus = Term::new(TermKind::Var("+".to_string()), span);
            let partial = Term::new(TermKind::App(Box::new(plus), Box::new(lhs)), span);
            lhs = Term::new(TermKind::App(Box::new(partial), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn app(&mut self) -> PResult<Term> {
        let mut f = self.postfix()?;
        while self.starts_atom() {
            let arg = self.postfix()?;
            let span = f.span;
            f = Term::new(TermKind::App(Box::new(f), Box::new(arg)), span);
        }
        // A trailing `fun` is an argument extending to the right. A trailing
        // `let` is not: at top level it starts the next declaration.
        if matches!(self.peek(), Tok::Fun) {
            let arg = self.expr()?;
            let span = f.span;
            f = Term::new(TermKind::App(Box::new(f), Box::new(arg)), span);
        }
        Ok(f)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_)
                | Tok::Int(_)
                | Tok::Float(_)
                | Tok::True
                | Tok::False
                | Tok::LParen
                | Tok::LBracket
                | Tok::LBrace
                | Tok::Lt
                | Tok::Hash
        )
    }

    fn postfix(&mut self) -> PResult<Term> {
        let mut e = self.atom()?;
        while self.peek() == &Tok::Dot {
            let span = self.span();
            self.advance();
            let kind = match self.peek().clone() {
                Tok::Int(j) => {
                    self.advance();
                    if j < 1 {
                        return Err(ParseError::new(span, "tuple indices start at 1"));
                    }
                    TermKind::ProjImplicit(Box::new(e), j as usize)
                }
                Tok::LParen => {
                    self.advance();
                    let j = self.int()?;
                    self.expect(Tok::Slash)?;
                    let n = self.int()?;
                    self.expect(Tok::RParen)?;
                    if n < 2 || j < 1 || j > n {
                        return Err(ParseError::new(span, format!("invalid tuple projection .({j}/{n})")));
                    }
                    TermKind::ProjExplicit(Box::new(e), j as usize, n as usize)
                }
                Tok::Ident(a) => {
                    self.advance();
                    let explicit = match (self.peek(), self.peek_at(1), self.records.get(&a)) {
                        (Tok::Dot, Tok::Ident(l), Some((_, labels))) => labels.contains(l),
                        _ => false,
                    };
                    if explicit {
                        self.advance();
                        let l = self.ident()?;
                        TermKind::FieldExplicit(Box::new(e), a, l)
                    } else {
                        TermKind::FieldImplicit(Box::new(e), a)
                    }
                }
                other => {
                    return Err(self.error(format!("expected a label or index after `.`, found {}", other.describe())))
                }
            };
            e = Term::new(kind, span);
        }
        Ok(e)
    }

    fn int(&mut self) -> PResult<i64> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(n)
            }
            other => Err(self.error(format!("expected an integer, found {}", other.describe()))),
        }
    }

    fn atom(&mut self) -> PResult<Term> {
        let span = self.span();
        let kind = match self.advance() {
            Tok::Ident(x) => TermKind::Var(x),
            Tok::Int(n) => TermKind::IntLit(n),
            Tok::Float(x) => TermKind::FloatLit(x),
            Tok::True => TermKind::BoolLit(true),
            Tok::False => TermKind::BoolLit(false),
            Tok::LParen => return self.paren(span),
            Tok::LBracket => {
                let e = self.expr()?;
                let kind = if self.eat(&Tok::Colon) {
                    let (flex, s) = self.box_annot()?;
                    TermKind::BoxExplicit(Box::new(e), flex, s)
                } else {
                    TermKind::BoxImplicit(Box::new(e))
                };
                self.expect(Tok::RBracket)?;
                kind
            }
            Tok::Lt => {
                let e = self.expr()?;
                let kind = if self.eat(&Tok::Colon) {
                    let (flex, s) = self.box_annot()?;
                    TermKind::UnboxExplicit(Box::new(e), flex, s)
                } else {
                    TermKind::UnboxImplicit(Box::new(e))
                };
                self.expect(Tok::Gt)?;
                kind
            }
            Tok::LBrace => self.record(span)?,
            Tok::Hash => {
                self.expect(Tok::LParen)?;
                let mut es = Vec::new();
                if !self.eat(&Tok::RParen) {
                    es.push(self.expr()?);
                    while self.eat(&Tok::Comma) {
                        es.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                }
                TermKind::Hole(es)
            }
            other => return Err(ParseError::new(span, format!("expected an expression, found {}", other.describe()))),
        };
        Ok(Term::new(kind, span))
    }

    /// After `(`: unit, operator section, parenthesized, tuple or annotation.
    fn paren(&mut self, span: Span) -> PResult<Term> {
        if self.eat(&Tok::RParen) {
            return Ok(Term::new(TermKind::UnitLit, span));
        }
        if self.peek() == &Tok::Plus && self.peek_at(1) == &Tok::RParen {
            self.advance();
            self.advance();
            return Ok(Term::new(TermKind::Var("+".to_string()), span));
        }
        let first = self.expr()?;
        if self.eat(&Tok::Colon) {
            let (flex, ty) = self.annot()?;
            self.expect(Tok::RParen)?;
            return Ok(Term::new(TermKind::Annot(Box::new(first), flex, ty), span));
        }
        if self.eat(&Tok::Comma) {
            let mut es = vec![first, self.expr()?];
            while self.eat(&Tok::Comma) {
                es.push(self.expr()?);
            }
            self.expect(Tok::RParen)?;
            return Ok(Term::new(TermKind::Tuple(es), span));
        }
        self.expect(Tok::RParen)?;
        Ok(first)
    }

    fn record(&mut self, span: Span) -> PResult<TermKind> {
        let explicit = match (self.peek().clone(), self.peek_at(1)) {
            (Tok::Ident(t), Tok::Bar) => {
                if !self.records.contains_key(&t) {
                    return Err(self.error(format!("unknown record type `{t}`")));
                }
                self.advance();
                self.advance();
                Some(t)
            }
            _ => None,
        };
        let mut fields: Vec<(String, Term)> = Vec::new();
        loop {
            let fspan = self.span();
            let label = self.ident()?;
            if fields.iter().any(|(l, _)| *l == label) {
                return Err(ParseError::new(fspan, format!("duplicate field label `{label}`")));
            }
            self.expect(Tok::Eq)?;
            fields.push((label, self.expr()?));
            if !self.eat(&Tok::Semi) || self.peek() == &Tok::RBrace {
                break;
            }
        }
        self.expect(Tok::RBrace)
            .map_err(|e| ParseError { message: format!("{} in record literal starting at {span}", e.message), ..e })?;
        Ok(match explicit {
            Some(t) => TermKind::RecordExplicit(t, fields),
            None => TermKind::Record(fields),
        })
    }

    fn ty(&mut self, scope: &mut Scope) -> PResult<TypeExpr> {
        let lhs = self.ty_tuple(scope)?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.ty(scope)?;
            return Ok(TypeExpr::Arrow(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn ty_tuple(&mut self, scope: &mut Scope) -> PResult<TypeExpr> {
        let first = self.ty_app(scope)?;
        if self.peek() != &Tok::Star {
            return Ok(first);
        }
        let mut ts = vec![first];
        while self.eat(&Tok::Star) {
            ts.push(self.ty_app(scope)?);
        }
        Ok(TypeExpr::Tuple(ts))
    }

    fn ty_app(&mut self, scope: &mut Scope) -> PResult<TypeExpr> {
        let mut args = self.ty_atom(scope)?;
        while let Tok::Ident(name) = self.peek().clone() {
            let span = self.span();
            self.advance();
            args = vec![self.named(name, args, span)?];
        }
        match args.len() {
            1 => Ok(args.pop().unwrap()),
            _ => Err(self.error("expected a record type name after a parenthesized argument list")),
        }
    }

    fn named(&self, name: String, args: Vec<TypeExpr>, span: Span) -> PResult<TypeExpr> {
        match self.records.get(&name) {
            None => Err(ParseError::new(span, format!("unknown record type `{name}`"))),
            Some((arity, _)) if *arity != args.len() => Err(ParseError::new(
                span,
                format!("record type `{name}` expects {arity} arguments, got {}", args.len()),
            )),
            Some(_) => Ok(TypeExpr::Named(name, args)),
        }
    }

    /// Returns several types only for a parenthesized argument list.
    fn ty_atom(&mut self, scope: &mut Scope) -> PResult<Vec<TypeExpr>> {
        let span = self.span();
        match self.advance() {
            Tok::TyVar(v) => {
                scope.check(&v, span)?;
                Ok(vec![TypeExpr::Var(v)])
            }
            Tok::Ident(name) => Ok(vec![match name.as_str() {
                "unit" => TypeExpr::Unit,
                "int" => TypeExpr::Int,
                "bool" => TypeExpr::Bool,
                "float" => TypeExpr::Float,
                _ => self.named(name, Vec::new(), span)?,
            }]),
            Tok::LParen => {
                let mut ts = vec![self.ty(scope)?];
                while self.eat(&Tok::Comma) {
                    ts.push(self.ty(scope)?);
                }
                self.expect(Tok::RParen)?;
                Ok(ts)
            }
            Tok::LBracket => {
                let vars = self.binder_prefix();
                scope.push(&vars);
                let body = self.ty(scope);
                scope.pop(vars.len());
                let body = body?;
                self.expect(Tok::RBracket)?;
                Ok(vec![TypeExpr::Poly(vars, Box::new(body))])
            }
            other => Err(ParseError::new(span, format!("expected a type, found {}", other.describe()))),
        }
    }
}

fn parse_expectation(body: &str) -> Option<Expectation> {
    let body = body.trim();
    if body == "ambiguous" {
        return Some(Expectation::Ambiguous);
    }
    if body == "error" {
        return Some(Expectation::TypeError);
    }
    let rest = body.strip_prefix("accept")?.trim();
    if rest.is_empty() {
        return Some(Expectation::Accept(None));
    }
    let ty = rest.strip_prefix(':')?.trim();
    (!ty.is_empty()).then(|| Expectation::Accept(Some(ty.to_string())))
}

/// `fun (x : t) -> e` means `fun x -> let x = (x : t) in e`.
fn wrap_params(params: Vec<Param>, body: Term, span: Span) -> Term {
    params.into_iter().rev().fold(body, |body, (x, annot, pspan)| {
        let body = match annot {
            None => body,
            Some((flex, ty)) => {
                let var = Term::new(TermKind::Var(x.clone()), pspan);
                let annotated = Term::new(TermKind::Annot(Box::new(var), flex, ty), pspan);
                Term::new(TermKind::Let(x.clone(), Box::new(annotated), Box::new(body)), pspan)
            }
        };
        Term::new(TermKind::Fun(x, Box::new(body)), span)
    })
}
