//! Structural SQL comparison up to alias renaming.
//!
//! A small parser for the emitted SQL subset feeds a canonicalizer that
//! renumbers aliases in declaration order (FROM, then JOINs, then subqueries
//! left to right). Two statements are alpha-equivalent when their
//! canonical forms are structurally equal. `AS` is optional, `USING` takes
//! its column with or without parentheses, strings may use either quote
//! style, and a trailing semicolon is ignored.

use std::collections::BTreeMap;

use thiserror::Error;

use super::gen::{ColRef, JoinCond, SqlExpr, SqlFrom, SqlJoin, SqlQuery};
use crate::model::Lit;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("sql parse error at {pos}: {msg}")]
pub struct MatchError {
    pub pos: usize,
    pub msg: String,
}

pub fn alpha_eq(a: &str, b: &str) -> Result<bool, MatchError> {
    Ok(canonicalize(&parse_sql(a)?) == canonicalize(&parse_sql(b)?))
}

const KEYWORDS: &[&str] = &[
    "SELECT", "FROM", "INNER", "JOIN", "ON", "USING", "WHERE", "AND", "NOT", "EXISTS", "AS",
    "TRUE", "FALSE",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Int(i64),
    Str(String),
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, MatchError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '.' | ',' | ';' | '(' | ')' | '*' | '>' | '=' | '-' => {
                toks.push((i, Tok::Sym(c)));
                i += 1;
            }
            '"' | '\'' => {
                let quote = c;
                let start = i;
                i += 1;
                let mut s = String::new();
                loop {
                    match bytes.get(i).map(|b| *b as char) {
                        None => {
                            return Err(MatchError { pos: start, msg: "unterminated string".into() })
                        }
                        Some(c) if c == quote => {
                            // A doubled quote is an escaped quote character.
                            if bytes.get(i + 1) == Some(&(quote as u8)) {
                                s.push(quote);
                                i += 2;
                            } else {
                                i += 1;
                                break;
                            }
                        }
                        Some(c) => {
                            s.push(c);
                            i += c.len_utf8();
                        }
                    }
                }
                toks.push((start, Tok::Str(s)));
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = text[start..i]
                    .parse()
                    .map_err(|_| MatchError { pos: start, msg: "integer out of range".into() })?;
                toks.push((start, Tok::Int(n)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((start, Tok::Word(text[start..i].to_string())));
            }
            _ => return Err(MatchError { pos: i, msg: format!("unexpected character `{c}`") }),
        }
    }
    Ok(toks)
}

pub fn parse_sql(text: &str) -> Result<SqlQuery, MatchError> {
    let mut p = P { toks: lex(text)?, at: 0 };
    let q = p.query()?;
    p.eat_sym(';');
    if p.at < p.toks.len() {
        return Err(p.err("end of statement"));
    }
    Ok(q)
}

struct P {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl P {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn err(&self, expected: &str) -> MatchError {
        let (pos, found) = match self.toks.get(self.at) {
            Some((pos, tok)) => (*pos, format!("{tok:?}")),
            None => (self.toks.last().map_or(0, |(p, _)| *p + 1), "end of input".into()),
        };
        MatchError { pos, msg: format!("expected {expected}, found {found}") }
    }

    /// Consume `word` case-insensitively if it is next.
    fn eat_kw(&mut self, word: &str) -> bool {
        if let Some(Tok::Word(w)) = self.peek() {
            if w.eq_ignore_ascii_case(word) {
                self.at += 1;
                return true;
            }
        }
        false
    }

    fn expect_kw(&mut self, word: &str) -> Result<(), MatchError> {
        if self.eat_kw(word) {
            Ok(())
        } else {
            Err(self.err(word))
        }
    }

    fn eat_sym(&mut self, sym: char) -> bool {
        if self.peek() == Some(&Tok::Sym(sym)) {
            self.at += 1;
            return true;
        }
        false
    }

    fn expect_sym(&mut self, sym: char) -> Result<(), MatchError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.err(&format!("`{sym}`")))
        }
    }

    fn ident(&mut self) -> Result<String, MatchError> {
        match self.peek() {
            Some(Tok::Word(w)) if !KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            _ => Err(self.err("an identifier")),
        }
    }

    fn query(&mut self) -> Result<SqlQuery, MatchError> {
        self.expect_kw("SELECT")?;
        let mut select = vec![self.expr()?];
        while self.eat_sym(',') {
            select.push(self.expr()?);
        }
        let mut from = None;
        let mut joins = Vec::new();
        if self.eat_kw("FROM") {
            let (table, alias) = self.source()?;
            from = Some(SqlFrom { table, alias });
            while self.eat_kw("INNER") {
                self.expect_kw("JOIN")?;
                let (table, alias) = self.source()?;
                let cond = if self.eat_kw("ON") {
                    let left = self.colref()?;
                    self.expect_sym('=')?;
                    let right = self.colref()?;
                    JoinCond::On { left, right }
                } else {
                    self.expect_kw("USING")?;
                    let parens = self.eat_sym('(');
                    let column = self.ident()?;
                    if parens {
                        self.expect_sym(')')?;
                    }
                    // The parent alias is an execution aid, not syntax.
                    JoinCond::Using { column, parent: String::new() }
                };
                joins.push(SqlJoin { table, alias, cond });
            }
        }
        let mut where_ = Vec::new();
        if self.eat_kw("WHERE") {
            where_.push(self.expr()?);
            while self.eat_kw("AND") {
                where_.push(self.expr()?);
            }
        }
        Ok(SqlQuery { select, from, joins, where_ })
    }

    /// `Table [AS] alias`; a missing alias defaults to the table name.
    fn source(&mut self) -> Result<(String, String), MatchError> {
        let table = self.ident()?;
        let _ = self.eat_kw("AS");
        let alias = self.ident().unwrap_or_else(|_| table.clone());
        Ok((table, alias))
    }

    fn colref(&mut self) -> Result<ColRef, MatchError> {
        let alias = self.ident()?;
        self.expect_sym('.')?;
        let column = self.ident()?;
        Ok(ColRef { alias, column })
    }

    fn expr(&mut self) -> Result<SqlExpr, MatchError> {
        let left = self.addsub()?;
        if self.eat_sym('>') {
            let right = self.addsub()?;
            return Ok(SqlExpr::Gt(Box::new(left), Box::new(right)));
        }
        if self.eat_sym('=') {
            let right = self.addsub()?;
            return Ok(SqlExpr::Eq(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn addsub(&mut self) -> Result<SqlExpr, MatchError> {
        let mut left = self.unary()?;
        while self.eat_sym('-') {
            let right = self.unary()?;
            left = SqlExpr::Sub(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<SqlExpr, MatchError> {
        if self.eat_kw("NOT") {
            self.expect_sym('(')?;
            let inner = self.expr()?;
            self.expect_sym(')')?;
            return Ok(SqlExpr::Not(Box::new(inner)));
        }
        if self.eat_kw("EXISTS") {
            self.expect_sym('(')?;
            let q = self.query()?;
            self.expect_sym(')')?;
            return Ok(SqlExpr::Exists(Box::new(q)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SqlExpr, MatchError> {
        if self.eat_sym('(') {
            let inner = self.expr()?;
            self.expect_sym(')')?;
            return Ok(inner);
        }
        if self.eat_kw("TRUE") {
            return Ok(SqlExpr::Lit(Lit::Bool(true)));
        }
        if self.eat_kw("FALSE") {
            return Ok(SqlExpr::Lit(Lit::Bool(false)));
        }
        if self.eat_sym('-') {
            if let Some(Tok::Int(n)) = self.peek() {
                let n = *n;
                self.at += 1;
                return Ok(SqlExpr::Lit(Lit::Int(-n)));
            }
            return Err(self.err("an integer"));
        }
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.at += 1;
                Ok(SqlExpr::Lit(Lit::Int(n)))
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(SqlExpr::Lit(Lit::Str(s)))
            }
            Some(Tok::Word(_)) => {
                let alias = self.ident()?;
                self.expect_sym('.')?;
                if self.eat_sym('*') {
                    Ok(SqlExpr::Star(alias))
                } else {
                    let column = self.ident()?;
                    Ok(SqlExpr::Col(ColRef { alias, column }))
                }
            }
            _ => Err(self.err("an expression")),
        }
    }
}

/// Renumber aliases `c0`, `c1`, … in declaration order and drop a lone
/// `WHERE True`. Aliases are assumed distinct across nesting, which holds
/// for generated statements.
pub fn canonicalize(q: &SqlQuery) -> SqlQuery {
    let mut map = BTreeMap::new();
    let mut n = 0;
    declare_query(q, &mut map, &mut n);
    rename_query(q, &map)
}

fn declare_query(q: &SqlQuery, map: &mut BTreeMap<String, String>, n: &mut usize) {
    let declare = |alias: &str, map: &mut BTreeMap<String, String>, n: &mut usize| {
        map.insert(alias.to_string(), format!("c{n}"));
        *n += 1;
    };
    if let Some(f) = &q.from {
        declare(&f.alias, map, n);
    }
    for j in &q.joins {
        declare(&j.alias, map, n);
    }
    for e in q.select.iter().chain(&q.where_) {
        declare_expr(e, map, n);
    }
}

fn declare_expr(e: &SqlExpr, map: &mut BTreeMap<String, String>, n: &mut usize) {
    match e {
        SqlExpr::Exists(q) => declare_query(q, map, n),
        SqlExpr::Not(x) => declare_expr(x, map, n),
        SqlExpr::Gt(l, r) | SqlExpr::Eq(l, r) | SqlExpr::Sub(l, r) => {
            declare_expr(l, map, n);
            declare_expr(r, map, n);
        }
        SqlExpr::Star(_) | SqlExpr::Col(_) | SqlExpr::Lit(_) => {}
    }
}

fn rename_query(q: &SqlQuery, map: &BTreeMap<String, String>) -> SqlQuery {
    let alias = |a: &str| map.get(a).cloned().unwrap_or_else(|| a.to_string());
    let col = |c: &ColRef| ColRef { alias: alias(&c.alias), column: c.column.clone() };
    let mut where_: Vec<SqlExpr> = q.where_.iter().map(|e| rename_expr(e, map)).collect();
    if where_ == [SqlExpr::Lit(Lit::Bool(true))] {
        where_.clear();
    }
    SqlQuery {
        select: q.select.iter().map(|e| rename_expr(e, map)).collect(),
        from: q
            .from
            .as_ref()
            .map(|f| SqlFrom { table: f.table.clone(), alias: alias(&f.alias) }),
        joins: q
            .joins
            .iter()
            .map(|j| SqlJoin {
                table: j.table.clone(),
                alias: alias(&j.alias),
                cond: match &j.cond {
                    JoinCond::Using { column, .. } => {
                        JoinCond::Using { column: column.clone(), parent: String::new() }
                    }
                    JoinCond::On { left, right } => {
                        JoinCond::On { left: col(left), right: col(right) }
                    }
                },
            })
            .collect(),
        where_,
    }
}

fn rename_expr(e: &SqlExpr, map: &BTreeMap<String, String>) -> SqlExpr {
    let alias = |a: &str| map.get(a).cloned().unwrap_or_else(|| a.to_string());
    match e {
        SqlExpr::Star(a) => SqlExpr::Star(alias(a)),
        SqlExpr::Col(c) => {
            SqlExpr::Col(ColRef { alias: alias(&c.alias), column: c.column.clone() })
        }
        SqlExpr::Lit(l) => SqlExpr::Lit(l.clone()),
        SqlExpr::Not(x) => SqlExpr::Not(Box::new(rename_expr(x, map))),
        SqlExpr::Gt(l, r) => {
            SqlExpr::Gt(Box::new(rename_expr(l, map)), Box::new(rename_expr(r, map)))
        }
        SqlExpr::Eq(l, r) => {
            SqlExpr::Eq(Box::new(rename_expr(l, map)), Box::new(rename_expr(r, map)))
        }
        SqlExpr::Sub(l, r) => {
            SqlExpr::Sub(Box::new(rename_expr(l, map)), Box::new(rename_expr(r, map)))
        }
        SqlExpr::Exists(q) => SqlExpr::Exists(Box::new(rename_query(q, map))),
    }
}
