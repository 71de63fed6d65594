//! Standard interpretation: run an elaborated optic against a nested value.
//!
//! All kinds evaluate into the uniform `Vec<Value>` encoding — a getter
//! produces exactly one element and an affine fold at most one; both
//! invariants are guaranteed by elaboration.

use crate::ast::{QueryOp, TNode, TOptic, TQuery};
use crate::model::{Lit, OpticKind, Schema, Value};

/// Query results, shaped by the query form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultSet {
    One(Value),
    Opt(Option<Value>),
    Many(Vec<Value>),
}

impl ResultSet {
    /// The underlying elements, shape erased.
    pub fn elements(&self) -> Vec<Value> {
        match self {
            ResultSet::One(v) => vec![v.clone()],
            ResultSet::Opt(v) => v.iter().cloned().collect(),
            ResultSet::Many(vs) => vs.clone(),
        }
    }
}

pub fn eval_query(schema: &Schema, query: &TQuery, value: &Value) -> ResultSet {
    let mut out = eval_optic(schema, &query.optic, value);
    match query.op {
        QueryOp::Get => ResultSet::One(out.remove(0)),
        QueryOp::Preview => ResultSet::Opt(out.into_iter().next()),
        QueryOp::GetAll => ResultSet::Many(out),
    }
}

pub fn eval_optic(schema: &Schema, optic: &TOptic, value: &Value) -> Vec<Value> {
    let out = eval_node(schema, optic, value);
    match optic.kind {
        OpticKind::Getter => debug_assert_eq!(out.len(), 1, "getters select exactly one part"),
        OpticKind::Affine => debug_assert!(out.len() <= 1, "affine folds select at most one part"),
        OpticKind::Fold => {}
    }
    out
}

/// Selects which derived combinator [`eval_derived_oracle`] computes, along
/// with the predicate or literal that combinator takes.
#[derive(Debug, Clone, Copy)]
pub enum DerivedForm<'a> {
    Empty,
    All(&'a TOptic),
    Any(&'a TOptic),
    Elem(&'a Lit),
}

/// Brute-force `empty`/`all`/`any`/`elem`, computed directly over the element
/// list of `fl`. Independent of desugaring, so it serves as an oracle for the
/// expanded forms.
pub fn eval_derived_oracle(
    schema: &Schema,
    fl: &TOptic,
    form: DerivedForm<'_>,
    input: &Value,
) -> bool {
    let items = eval_optic(schema, fl, input);
    let holds = |p: &TOptic, v: &Value| eval_optic(schema, p, v) == [Value::B(true)];
    match form {
        DerivedForm::Empty => items.is_empty(),
        DerivedForm::All(p) => items.iter().all(|v| holds(p, v)),
        DerivedForm::Any(p) => items.iter().any(|v| holds(p, v)),
        DerivedForm::Elem(a) => items.contains(&a.to_value()),
    }
}

fn eval_node(schema: &Schema, optic: &TOptic, value: &Value) -> Vec<Value> {
    let one = |v: Value| vec![v];
    let get = |o: &TOptic, v: &Value| {
        let mut out = eval_optic(schema, o, v);
        debug_assert_eq!(out.len(), 1);
        out.remove(0)
    };
    match &optic.node {
        TNode::Id => one(value.clone()),
        TNode::Prim(name) => {
            // The root document is the bare child list of its single prim;
            // every other prim projects a record field keyed by its name.
            let prim = schema.prim(name).expect("elaborated prims exist");
            if prim.whole == schema.root_name() {
                match value {
                    Value::L(items) => items.clone(),
                    _ => unreachable!("root values are lists"),
                }
            } else {
                let field = value.field(name).expect("schema-typed values have all fields");
                match (prim.kind, field) {
                    (OpticKind::Getter, v) => one(v.clone()),
                    (_, Value::L(items)) => items.clone(),
                    _ => unreachable!("affine and fold fields are stored as lists"),
                }
            }
        }
        TNode::Seq(l, r) => eval_optic(schema, l, value)
            .iter()
            .flat_map(|mid| eval_optic(schema, r, mid))
            .collect(),
        TNode::Fork(l, r) => one(Value::P(Box::new(get(l, value)), Box::new(get(r, value)))),
        TNode::Like(lit) => one(lit.to_value()),
        TNode::Not(x) => match get(x, value) {
            Value::B(b) => one(Value::B(!b)),
            _ => unreachable!("`.not` operand is Bool-typed"),
        },
        TNode::Gt(l, r) => match (get(l, value), get(r, value)) {
            (Value::I(a), Value::I(b)) => one(Value::B(a > b)),
            _ => unreachable!("`>` operands are Int-typed"),
        },
        TNode::Eq(l, r) => one(Value::B(get(l, value) == get(r, value))),
        TNode::Sub(l, r) => match (get(l, value), get(r, value)) {
            (Value::I(a), Value::I(b)) => one(Value::I(a - b)),
            _ => unreachable!("`-` operands are Int-typed"),
        },
        TNode::Filtered(p) => match get(p, value) {
            Value::B(true) => one(value.clone()),
            Value::B(false) => Vec::new(),
            _ => unreachable!("filter predicates are Bool-typed"),
        },
        TNode::NonEmpty(f) => one(Value::B(!eval_optic(schema, f, value).is_empty())),
        TNode::ToAf(x) | TNode::ToFl(x) => eval_node(schema, x, value),
    }
}
