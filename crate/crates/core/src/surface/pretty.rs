//! Concrete text for surface ASTs. Output reparses to the same AST.

use super::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for item in &p.items {
        match item {
            Item::Type(d) => {
                out.push_str("type ");
                match d.params.len() {
                    0 => {}
                    1 => out.push_str(&format!("'{} ", d.params[0])),
                    _ => {
                        let ps: Vec<String> = d.params.iter().map(|p| format!("'{p}")).collect();
                        out.push_str(&format!("({}) ", ps.join(", ")));
                    }
                }
                let fields: Vec<String> =
                    d.fields.iter().map(|(l, t)| format!("{l} : {}", print_type_expr(t))).collect();
                out.push_str(&format!("{} = {{ {} }}\n", d.name, fields.join("; ")));
            }
            Item::Let(b) => {
                out.push_str(&format!("let {} = {}\n", b.name, print_term(&b.term)));
                match &b.expect {
                    None => {}
                    Some(Expectation::Accept(None)) => out.push_str("(*! accept *)\n"),
                    Some(Expectation::Accept(Some(s))) => out.push_str(&format!("(*! accept : {s} *)\n")),
                    Some(Expectation::Ambiguous) => out.push_str("(*! ambiguous *)\n"),
                    Some(Expectation::TypeError) => out.push_str("(*! error *)\n"),
                }
            }
        }
    }
    out
}

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    term(t, Prec::Expr, &mut out);
    out
}

pub fn print_type_expr(t: &TypeExpr) -> String {
    let mut out = String::new();
    ty(t, 0, &mut out);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Expr,
    App,
    Postfix,
}

fn term(t: &Term, prec: Prec, out: &mut String) {
    let needs = match &t.kind {
        TermKind::Fun(..) | TermKind::Let(..) => prec > Prec::Expr,
        TermKind::App(..) => prec > Prec::App,
        _ => false,
    };
    if needs {
        out.push('(');
        term(t, Prec::Expr, out);
        out.push(')');
        return;
    }
    match &t.kind {
        TermKind::Var(x) if x == "+" => out.push_str("(+)"),
        TermKind::Var(x) => out.push_str(x),
        TermKind::UnitLit => out.push_str("()"),
        TermKind::IntLit(n) => out.push_str(&n.to_string()),
        TermKind::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        TermKind::FloatLit(x) => out.push_str(&format!("{x:?}")),
        TermKind::Fun(x, body) => {
            out.push_str(&format!("fun {x} -> "));
            term(body, Prec::Expr, out);
        }
        TermKind::Let(x, def, body) => {
            out.push_str(&format!("let {x} = "));
            term(def, Prec::Expr, out);
            out.push_str(" in ");
            term(body, Prec::Expr, out);
        }
        TermKind::App(f, a) => {
            term(f, Prec::App, out);
            out.push(' ');
            term(a, Prec::Postfix, out);
        }
        TermKind::Annot(e, flex, t) => {
            out.push('(');
            term(e, Prec::Expr, out);
            out.push_str(" : ");
            binders(flex, out);
            ty(t, 0, out);
            out.push(')');
        }
        TermKind::Tuple(es) => {
            out.push('(');
            comma_terms(es, out);
            out.push(')');
        }
        TermKind::ProjImplicit(e, j) => {
            receiver(e, false, out);
            out.push_str(&format!(".{j}"));
        }
        TermKind::ProjExplicit(e, j, n) => {
            receiver(e, false, out);
            out.push_str(&format!(".({j}/{n})"));
        }
        TermKind::FieldImplicit(e, l) => {
            receiver(e, true, out);
            out.push_str(&format!(".{l}"));
        }
        TermKind::FieldExplicit(e, r, l) => {
            receiver(e, true, out);
            out.push_str(&format!(".{r}.{l}"));
        }
        TermKind::BoxImplicit(e) => {
            out.push('[');
            term(e, Prec::Expr, out);
            out.push(']');
        }
        TermKind::BoxExplicit(e, flex, s) => {
            out.push('[');
            term(e, Prec::Expr, out);
            box_annot(flex, s, out);
            out.push(']');
        }
        TermKind::UnboxImplicit(e) => {
            out.push('<');
            term(e, Prec::Expr, out);
            out.push('>');
        }
        TermKind::UnboxExplicit(e, flex, s) => {
            out.push('<');
            term(e, Prec::Expr, out);
            box_annot(flex, s, out);
            out.push('>');
        }
        TermKind::Record(fs) => {
            out.push('{');
            fields(fs, out);
            out.push('}');
        }
        TermKind::RecordExplicit(r, fs) => {
            out.push_str(&format!("{{{r} | "));
            fields(fs, out);
            out.push('}');
        }
        TermKind::Hole(es) => {
            out.push_str("#(");
            comma_terms(es, out);
            out.push(')');
        }
    }
}

/// A field receiver that is itself an implicit field access is parenthesized,
/// since `r.a.b` would read as an explicit projection when `a` is a record.
/// Numeric receivers are too: `0.1` is a float literal.
fn receiver(e: &Term, field: bool, out: &mut String) {
    let numeric = matches!(e.kind, TermKind::IntLit(_) | TermKind::FloatLit(_));
    if numeric || (field && matches!(e.kind, TermKind::FieldImplicit(..))) {
        out.push('(');
        term(e, Prec::Expr, out);
        out.push(')');
    } else {
        term(e, Prec::Postfix, out);
    }
}

fn comma_terms(es: &[Term], out: &mut String) {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        term(e, Prec::Expr, out);
    }
}

fn fields(fs: &[(String, Term)], out: &mut String) {
    for (i, (l, e)) in fs.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&format!("{l} = "));
        term(e, Prec::Expr, out);
    }
}

fn binders(vs: &[String], out: &mut String) {
    if !vs.is_empty() {
        let names: Vec<String> = vs.iter().map(|v| format!("'{v}")).collect();
        out.push_str(&names.join(" "));
        out.push_str(". ");
    }
}

fn box_annot(flex: &[String], s: &SchemeExpr, out: &mut String) {
    out.push_str(" : ");
    if !flex.is_empty() {
        out.push_str("exists ");
        binders(flex, out);
    }
    binders(&s.vars, out);
    ty(&s.body, 0, out);
}

/// Precedence: 0 arrow, 1 tuple component, 2 record argument.
fn ty(t: &TypeExpr, prec: u8, out: &mut String) {
    match t {
        TypeExpr::Var(v) => out.push_str(&format!("'{v}")),
        TypeExpr::Unit => out.push_str("unit"),
        TypeExpr::Int => out.push_str("int"),
        TypeExpr::Bool => out.push_str("bool"),
        TypeExpr::Float => out.push_str("float"),
        TypeExpr::Arrow(a, b) => {
            if prec > 0 {
                out.push('(');
            }
            ty(a, 1, out);
            out.push_str(" -> ");
            ty(b, 0, out);
            if prec > 0 {
                out.push(')');
            }
        }
        TypeExpr::Tuple(ts) => {
            if prec > 0 {
                out.push('(');
            }
            for (i, c) in ts.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                ty(c, 2, out);
            }
            if prec > 0 {
                out.push(')');
            }
        }
        TypeExpr::Named(n, args) => {
            match args.len() {
                0 => {}
                1 => {
                    ty(&args[0], 2, out);
                    out.push(' ');
                }
                _ => {
                    out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        ty(a, 0, out);
                    }
                    out.push_str(") ");
                }
            }
            out.push_str(n);
        }
        TypeExpr::Poly(vs, body) => {
            out.push('[');
            binders(vs, out);
            ty(body, 0, out);
            out.push(']');
        }
    }
}
