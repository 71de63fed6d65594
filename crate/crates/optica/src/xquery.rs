//! XQuery emission: optics become path expressions over the XML convention.
//!
//! Every optic denotes a fragment relative to the current context node; the
//! entry-point fold denotes an absolute `/xml/...` path. Composition is
//! `compose`, which is self-axis aware: trailing onto `.` merges, a `.[p]`
//! filter attaches directly to its left path, and non-path right sides become
//! parenthesized steps.

use std::fmt::Write as _;

use crate::ast::{TNode, TOptic, TQuery};
use crate::model::{Lit, Schema};
use crate::Quote;

/// Compose two fragments along the path axis.
pub fn compose(l: &str, r: &str) -> String {
    if l == "." {
        return r.to_string();
    }
    if r == "." {
        return l.to_string();
    }
    if let Some(filter) = r.strip_prefix(".[") {
        return format!("{l}[{filter}");
    }
    if r.starts_with('.') || has_top_level_space(r) {
        return format!("{l}/({r})");
    }
    format!("{l}/{r}")
}

/// True when the fragment has a space outside brackets, braces and quotes —
/// i.e. it is an operator expression, not a lone path step.
fn has_top_level_space(s: &str) -> bool {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    for c in s.chars() {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '"' | '\'' => quote = Some(c),
                '[' | '(' | '{' | '<' => depth += 1,
                ']' | ')' | '}' | '>' => depth = depth.saturating_sub(1),
                ' ' if depth == 0 => return true,
                _ => {}
            },
        }
    }
    false
}

/// Parenthesize an operand that is itself an operator expression.
fn operand(s: String) -> String {
    if has_top_level_space(&s) {
        format!("({s})")
    } else {
        s
    }
}

pub fn xquery_of_query(schema: &Schema, query: &TQuery, quote: Quote) -> String {
    xquery_of_optic(schema, &query.optic, quote)
}

pub fn xquery_of_optic(schema: &Schema, optic: &TOptic, quote: Quote) -> String {
    match &optic.node {
        TNode::Id => ".".into(),
        TNode::Prim(name) => {
            let prim = schema.prim(name).expect("elaborated prims exist");
            if prim.whole == schema.root_name() {
                format!("/xml/{}", prim.element)
            } else {
                prim.element.clone()
            }
        }
        TNode::Seq(l, r) => compose(
            &xquery_of_optic(schema, l, quote),
            &xquery_of_optic(schema, r, quote),
        ),
        TNode::Fork(l, r) => {
            let mut out = String::from("<tuple>");
            write!(out, "<one>{{{}}}</one>", xquery_of_optic(schema, l, quote)).unwrap();
            write!(out, "<two>{{{}}}</two>", xquery_of_optic(schema, r, quote)).unwrap();
            out.push_str("</tuple>");
            out
        }
        TNode::Like(Lit::Int(n)) => n.to_string(),
        TNode::Like(Lit::Bool(b)) => format!("{b}()"),
        TNode::Like(Lit::Str(s)) => quote.wrap(s),
        TNode::Not(x) => match &x.node {
            // A doubled negation cancels in the Boolean domain.
            TNode::Not(inner) => xquery_of_optic(schema, inner, quote),
            _ => format!("not({})", xquery_of_optic(schema, x, quote)),
        },
        TNode::Gt(l, r) => format!(
            "{} > {}",
            operand(xquery_of_optic(schema, l, quote)),
            operand(xquery_of_optic(schema, r, quote))
        ),
        TNode::Eq(l, r) => format!(
            "{} = {}",
            operand(xquery_of_optic(schema, l, quote)),
            operand(xquery_of_optic(schema, r, quote))
        ),
        TNode::Sub(l, r) => format!(
            "{} - {}",
            operand(xquery_of_optic(schema, l, quote)),
            operand(xquery_of_optic(schema, r, quote))
        ),
        TNode::Filtered(p) => format!(".[{}]", xquery_of_optic(schema, p, quote)),
        TNode::NonEmpty(f) => format!("exists({})", xquery_of_optic(schema, f, quote)),
        TNode::ToAf(x) | TNode::ToFl(x) => xquery_of_optic(schema, x, quote),
    }
}
