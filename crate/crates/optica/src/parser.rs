//! Surface syntax for optic expressions and queries.
//!
//! Binding, loosest to tightest: `***`, comparisons (`>`, `==`,
//! non-associative), `-`, `>>>`, postfix `.not`. Bare literals are sugar for
//! `like(...)`. `get`, `preview` and `getAll` wrap a whole expression.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ast::{QueryOp, RawExpr, RawQuery};
use crate::model::Lit;

/// Words with grammar meaning; schemas may not use them as optic names.
pub const RESERVED: &[&str] = &[
    "id", "like", "not", "filtered", "nonEmpty", "empty", "all", "any", "elem", "to_af", "to_fl",
    "get", "preview", "getAll", "true", "false",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("byte {pos}: unexpected character `{ch}`")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("byte {pos}: unterminated string literal")]
    UnterminatedString { pos: usize },
    #[error("byte {pos}: integer literal out of range")]
    IntRange { pos: usize },
    #[error("byte {pos}: expected {expected}, found {found}")]
    Unexpected { pos: usize, expected: &'static str, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    SeqOp,   // >>>
    ForkOp,  // ***
    GtOp,    // >
    EqOp,    // ==
    SubOp,   // -
    Dot,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(_) => "a string".into(),
            Tok::SeqOp => "`>>>`".into(),
            Tok::ForkOp => "`***`".into(),
            Tok::GtOp => "`>`".into(),
            Tok::EqOp => "`==`".into(),
            Tok::SubOp => "`-`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Tok::Eof));
        }
        let rest = &self.src[self.pos..];
        let sym = |lex: &mut Self, len: usize, tok: Tok| {
            lex.pos += len;
            Ok((start, tok))
        };
        match rest[0] {
            b'>' if rest.starts_with(b">>>") => sym(self, 3, Tok::SeqOp),
            b'*' if rest.starts_with(b"***") => sym(self, 3, Tok::ForkOp),
            b'=' if rest.starts_with(b"==") => sym(self, 2, Tok::EqOp),
            b'>' => sym(self, 1, Tok::GtOp),
            b'-' => sym(self, 1, Tok::SubOp),
            b'.' => sym(self, 1, Tok::Dot),
            b'(' => sym(self, 1, Tok::LParen),
            b')' => sym(self, 1, Tok::RParen),
            b',' => sym(self, 1, Tok::Comma),
            b'"' => {
                self.pos += 1;
                let mut text = String::new();
                loop {
                    match self.src.get(self.pos) {
                        None => return Err(ParseError::UnterminatedString { pos: start }),
                        Some(b'"') => {
                            self.pos += 1;
                            return Ok((start, Tok::Str(text)));
                        }
                        Some(b'\\') => {
                            match self.src.get(self.pos + 1) {
                                Some(b'"') => text.push('"'),
                                Some(b'\\') => text.push('\\'),
                                _ => return Err(ParseError::UnterminatedString { pos: start }),
                            }
                            self.pos += 2;
                        }
                        Some(&c) => {
                            text.push(c as char);
                            self.pos += 1;
                        }
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut end = self.pos;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).expect("ascii digits");
                self.pos = end;
                let n = text.parse::<i64>().map_err(|_| ParseError::IntRange { pos: start })?;
                Ok((start, Tok::Int(n)))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).expect("ascii word");
                self.pos = end;
                Ok((start, Tok::Ident(text.to_string())))
            }
            c => Err(ParseError::UnexpectedChar { pos: start, ch: c as char }),
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src: src.as_bytes(), pos: 0 };
        let mut toks = Vec::new();
        loop {
            let tok = lexer.next_tok()?;
            let done = tok.1 == Tok::Eof;
            toks.push(tok);
            if done {
                return Ok(Parser { toks, at: 0 });
            }
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn bump(&mut self) -> (usize, Tok) {
        let tok = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn fail<T>(&mut self, expected: &'static str) -> Result<T, ParseError> {
        let (pos, tok) = self.bump();
        Err(ParseError::Unexpected { pos, expected, found: tok.describe() })
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    // fork := cmp (`***` cmp)*
    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut acc = self.cmp()?;
        while *self.peek() == Tok::ForkOp {
            self.bump();
            acc = RawExpr::Fork(Box::new(acc), Box::new(self.cmp()?));
        }
        Ok(acc)
    }

    // cmp := sub ((`>` | `==`) sub)?   — non-associative
    fn cmp(&mut self) -> Result<RawExpr, ParseError> {
        let lhs = self.sub()?;
        match self.peek() {
            Tok::GtOp => {
                self.bump();
                Ok(RawExpr::Gt(Box::new(lhs), Box::new(self.sub()?)))
            }
            Tok::EqOp => {
                self.bump();
                Ok(RawExpr::Eq(Box::new(lhs), Box::new(self.sub()?)))
            }
            _ => Ok(lhs),
        }
    }

    // sub := seq (`-` seq)*
    fn sub(&mut self) -> Result<RawExpr, ParseError> {
        let mut acc = self.seq()?;
        while *self.peek() == Tok::SubOp {
            self.bump();
            acc = RawExpr::Sub(Box::new(acc), Box::new(self.seq()?));
        }
        Ok(acc)
    }

    // seq := postfix (`>>>` postfix)*
    fn seq(&mut self) -> Result<RawExpr, ParseError> {
        let mut acc = self.postfix()?;
        while *self.peek() == Tok::SeqOp {
            self.bump();
            acc = RawExpr::Seq(Box::new(acc), Box::new(self.postfix()?));
        }
        Ok(acc)
    }

    // postfix := primary (`.not`)*
    fn postfix(&mut self) -> Result<RawExpr, ParseError> {
        let mut acc = self.primary()?;
        while *self.peek() == Tok::Dot {
            self.bump();
            match self.bump() {
                (_, Tok::Ident(word)) if word == "not" => {
                    acc = RawExpr::Not(Box::new(acc));
                }
                (pos, tok) => {
                    return Err(ParseError::Unexpected {
                        pos,
                        expected: "`not` after `.`",
                        found: tok.describe(),
                    })
                }
            }
        }
        Ok(acc)
    }

    fn literal(&mut self) -> Result<Lit, ParseError> {
        match self.bump() {
            (_, Tok::Int(n)) => Ok(Lit::Int(n)),
            (_, Tok::Str(s)) => Ok(Lit::Str(s)),
            (_, Tok::Ident(w)) if w == "true" => Ok(Lit::Bool(true)),
            (_, Tok::Ident(w)) if w == "false" => Ok(Lit::Bool(false)),
            (pos, tok) => {
                Err(ParseError::Unexpected { pos, expected: "a literal", found: tok.describe() })
            }
        }
    }

    fn paren_expr(&mut self) -> Result<RawExpr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn primary(&mut self) -> Result<RawExpr, ParseError> {
        match self.peek().clone() {
            Tok::LParen => self.paren_expr(),
            Tok::Int(_) | Tok::Str(_) => Ok(RawExpr::Like(self.literal()?)),
            Tok::Ident(word) => {
                match word.as_str() {
                    "true" | "false" => return Ok(RawExpr::Like(self.literal()?)),
                    _ => {}
                }
                self.bump();
                match word.as_str() {
                    "id" => Ok(RawExpr::IdOptic),
                    "like" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let lit = self.literal()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(RawExpr::Like(lit))
                    }
                    "filtered" => Ok(RawExpr::Filtered(Box::new(self.paren_expr()?))),
                    "nonEmpty" => Ok(RawExpr::NonEmpty(Box::new(self.paren_expr()?))),
                    "to_af" => Ok(RawExpr::ToAf(Box::new(self.paren_expr()?))),
                    "to_fl" => Ok(RawExpr::ToFl(Box::new(self.paren_expr()?))),
                    "empty" => Ok(RawExpr::Empty(Box::new(self.paren_expr()?))),
                    "all" | "any" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let f = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let p = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(if word == "all" {
                            RawExpr::All(Box::new(f), Box::new(p))
                        } else {
                            RawExpr::Any(Box::new(f), Box::new(p))
                        })
                    }
                    "elem" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let f = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let lit = self.literal()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(RawExpr::Elem(Box::new(f), lit))
                    }
                    "not" | "get" | "preview" | "getAll" => {
                        self.at -= 1;
                        self.fail("an optic expression")
                    }
                    _ => Ok(RawExpr::Name(word)),
                }
            }
            _ => self.fail("an optic expression"),
        }
    }

    fn query(&mut self) -> Result<RawQuery, ParseError> {
        let op = match self.bump() {
            (_, Tok::Ident(w)) if w == "get" => QueryOp::Get,
            (_, Tok::Ident(w)) if w == "preview" => QueryOp::Preview,
            (_, Tok::Ident(w)) if w == "getAll" => QueryOp::GetAll,
            (pos, tok) => {
                return Err(ParseError::Unexpected {
                    pos,
                    expected: "`get`, `preview` or `getAll`",
                    found: tok.describe(),
                })
            }
        };
        let optic = self.paren_expr()?;
        Ok(RawQuery { op, optic })
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.fail("end of input")
        }
    }
}

pub fn parse_optic(src: &str) -> Result<RawExpr, ParseError> {
    let mut parser = Parser::new(src)?;
    let e = parser.expr()?;
    parser.finish()?;
    Ok(e)
}

pub fn parse_query(src: &str) -> Result<RawQuery, ParseError> {
    let mut parser = Parser::new(src)?;
    let q = parser.query()?;
    parser.finish()?;
    Ok(q)
}

fn fmt_lit(lit: &Lit, out: &mut String) {
    match lit {
        Lit::Int(n) => write!(out, "{n}").unwrap(),
        Lit::Bool(b) => write!(out, "{b}").unwrap(),
        Lit::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
    }
}

// Binding levels; parenthesize a child whose level is below the context.
const LVL_FORK: u8 = 1;
const LVL_CMP: u8 = 2;
const LVL_SUB: u8 = 3;
const LVL_SEQ: u8 = 4;
const LVL_POST: u8 = 5;
const LVL_ATOM: u8 = 6;

fn level(e: &RawExpr) -> u8 {
    match e {
        RawExpr::Fork(_, _) => LVL_FORK,
        RawExpr::Gt(_, _) | RawExpr::Eq(_, _) => LVL_CMP,
        RawExpr::Sub(_, _) => LVL_SUB,
        RawExpr::Seq(_, _) => LVL_SEQ,
        RawExpr::Not(_) => LVL_POST,
        _ => LVL_ATOM,
    }
}

fn fmt_expr(e: &RawExpr, min: u8, out: &mut String) {
    let lvl = level(e);
    if lvl < min {
        out.push('(');
        fmt_expr(e, 0, out);
        out.push(')');
        return;
    }
    let call = |name: &str, args: &[&RawExpr], out: &mut String| {
        out.push_str(name);
        out.push('(');
        for (i, arg) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            fmt_expr(arg, 0, out);
        }
        out.push(')');
    };
    match e {
        RawExpr::Fork(l, r) => {
            fmt_expr(l, LVL_FORK, out);
            out.push_str(" *** ");
            fmt_expr(r, LVL_CMP, out);
        }
        RawExpr::Gt(l, r) | RawExpr::Eq(l, r) => {
            fmt_expr(l, LVL_SUB, out);
            out.push_str(if matches!(e, RawExpr::Gt(_, _)) { " > " } else { " == " });
            fmt_expr(r, LVL_SUB, out);
        }
        RawExpr::Sub(l, r) => {
            fmt_expr(l, LVL_SUB, out);
            out.push_str(" - ");
            fmt_expr(r, LVL_SEQ, out);
        }
        RawExpr::Seq(l, r) => {
            fmt_expr(l, LVL_SEQ, out);
            out.push_str(" >>> ");
            fmt_expr(r, LVL_POST, out);
        }
        RawExpr::Not(x) => {
            fmt_expr(x, LVL_POST, out);
            out.push_str(".not");
        }
        RawExpr::Name(name) => out.push_str(name),
        RawExpr::IdOptic => out.push_str("id"),
        RawExpr::Like(lit) => {
            out.push_str("like(");
            fmt_lit(lit, out);
            out.push(')');
        }
        RawExpr::Filtered(p) => call("filtered", &[p], out),
        RawExpr::NonEmpty(f) => call("nonEmpty", &[f], out),
        RawExpr::ToAf(x) => call("to_af", &[x], out),
        RawExpr::ToFl(x) => call("to_fl", &[x], out),
        RawExpr::Empty(f) => call("empty", &[f], out),
        RawExpr::All(f, p) => call("all", &[f, p], out),
        RawExpr::Any(f, p) => call("any", &[f, p], out),
        RawExpr::Elem(f, lit) => {
            out.push_str("elem(");
            fmt_expr(f, 0, out);
            out.push_str(", ");
            fmt_lit(lit, out);
            out.push(')');
        }
    }
}

pub fn print_optic(e: &RawExpr) -> String {
    let mut out = String::new();
    fmt_expr(e, 0, &mut out);
    out
}

pub fn print_query(q: &RawQuery) -> String {
    let op = match q.op {
        QueryOp::Get => "get",
        QueryOp::Preview => "preview",
        QueryOp::GetAll => "getAll",
    };
    format!("{op}({})", print_optic(&q.optic))
}
