use super::parser::ParseError;
use super::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    TyVar(String),
    Int(i64),
    Float(f64),
    Type,
    Let,
    In,
    Fun,
    True,
    False,
    Exists,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Arrow,
    Colon,
    Semi,
    Comma,
    Dot,
    Eq,
    Star,
    Bar,
    Plus,
    Hash,
    Slash,
    /// Body of a `(*! ... *)` comment.
    Expect(String),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::TyVar(s) => format!("type variable `'{s}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Float(x) => format!("float `{x:?}`"),
            Tok::Expect(_) => "expectation comment".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", symbol(other)),
        }
    }
}

fn symbol(t: &Tok) -> &'static str {
    match t {
        Tok::Type => "type",
        Tok::Let => "let",
        Tok::In => "in",
        Tok::Fun => "fun",
        Tok::True => "true",
        Tok::False => "false",
        Tok::Exists => "exists",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Lt => "<",
        Tok::Gt => ">",
        Tok::Arrow => "->",
        Tok::Colon => ":",
        Tok::Semi => ";",
        Tok::Comma => ",",
        Tok::Dot => ".",
        Tok::Eq => "=",
        Tok::Star => "*",
        Tok::Bar => "|",
        Tok::Plus => "+",
        Tok::Hash => "#",
        Tok::Slash => "/",
        _ => "?",
    }
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<(Tok, Span)> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '(' && chars.get(i + 1) == Some(&'*') {
            let expect = chars.get(i + 2) == Some(&'!');
            bump!();
            bump!();
            if expect {
                bump!();
            }
            let start = i;
            let mut depth = 1;
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(span, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&')') {
                    depth -= 1;
                    if depth == 0 || expect {
                        break;
                    }
                    bump!();
                    bump!();
                    continue;
                }
                if !expect && chars[i] == '(' && chars.get(i + 1) == Some(&'*') {
                    depth += 1;
                    bump!();
                }
                bump!();
            }
            let body: String = chars[start..i].iter().collect();
            bump!();
            bump!();
            if expect {
                out.push((Tok::Expect(body.trim().to_string()), span));
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "type" => Tok::Type,
                "let" => Tok::Let,
                "in" => Tok::In,
                "fun" => Tok::Fun,
                "true" => Tok::True,
                "false" => Tok::False,
                "exists" => Tok::Exists,
                _ => Tok::Ident(word),
            };
            out.push((tok, span));
            continue;
        }
        if c == '\'' {
            bump!();
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            if start == i {
                return Err(ParseError::new(span, "expected a type variable name after `'`"));
            }
            out.push((Tok::TyVar(chars[start..i].iter().collect()), span));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            // After `.` only an integer index can follow, so `e.1.2` projects twice.
            let after_dot = matches!(out.last(), Some((Tok::Dot, _)));
            let is_float = !after_dot
                && chars.get(i) == Some(&'.')
                && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
            if is_float {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
                let text: String = chars[start..i].iter().collect();
                let x = text.parse().map_err(|_| ParseError::new(span, "malformed float literal"))?;
                out.push((Tok::Float(x), span));
            } else {
                let text: String = chars[start..i].iter().collect();
                let n = text.parse().map_err(|_| ParseError::new(span, "integer literal out of range"))?;
                out.push((Tok::Int(n), span));
            }
            continue;
        }
        let tok = match c {
            '-' if chars.get(i + 1) == Some(&'>') => {
                bump!();
                Tok::Arrow
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '=' => Tok::Eq,
            '*' => Tok::Star,
            '|' => Tok::Bar,
            '+' => Tok::Plus,
            '#' => Tok::Hash,
            '/' => Tok::Slash,
            other => return Err(ParseError::new(span, format!("unexpected character `{other}`"))),
        };
        bump!();
        out.push((tok, span));
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}
