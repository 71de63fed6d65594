//! Reference interpreter for comprehension terms over shredded tables.
//!
//! Used to validate that normalization preserves meaning. Table rows become
//! records of their columns, NULL cells compare unequal to everything, and
//! projecting a field out of a singleton bag projects its one record — that
//! is how adapter-joined foreign keys behave under getter composition.

use std::collections::BTreeMap;

use super::{ComprError, ComprExpr, POp};
use crate::model::{Database, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CVal {
    Base(Value),
    Null,
    Rec(Vec<(String, CVal)>),
    Bag(Vec<CVal>),
    Fun(String, ComprExpr, Env),
}

pub type Env = BTreeMap<String, CVal>;

pub fn interp(db: &Database, e: &ComprExpr) -> Result<CVal, ComprError> {
    go(db, e, &Env::new())
}

fn go(db: &Database, e: &ComprExpr, env: &Env) -> Result<CVal, ComprError> {
    match e {
        ComprExpr::Var(x) => {
            env.get(x).cloned().ok_or_else(|| ComprError::Unbound(x.clone()))
        }
        ComprExpr::Lam(x, b) => Ok(CVal::Fun(x.clone(), b.as_ref().clone(), env.clone())),
        ComprExpr::App(f, a) => {
            let arg = go(db, a, env)?;
            match go(db, f, env)? {
                CVal::Fun(x, body, mut closure) => {
                    closure.insert(x, arg);
                    go(db, &body, &closure)
                }
                v => Err(ComprError::TypeMismatch(format!("applied a non-function {v:?}"))),
            }
        }
        ComprExpr::Record(fields) => Ok(CVal::Rec(
            fields
                .iter()
                .map(|(n, v)| Ok((n.clone(), go(db, v, env)?)))
                .collect::<Result<_, ComprError>>()?,
        )),
        ComprExpr::Field(r, name) => match go(db, r, env)? {
            CVal::Rec(fields) => fields
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v)
                .ok_or_else(|| ComprError::UnknownField(name.clone())),
            CVal::Bag(items) => match <[CVal; 1]>::try_from(items) {
                Ok([CVal::Rec(fields)]) => fields
                    .into_iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v)
                    .ok_or_else(|| ComprError::UnknownField(name.clone())),
                Ok([v]) => {
                    Err(ComprError::TypeMismatch(format!("projected `{name}` from {v:?}")))
                }
                Err(items) => Err(ComprError::NotSingleton(items.len())),
            },
            v => Err(ComprError::TypeMismatch(format!("projected `{name}` from {v:?}"))),
        },
        ComprExpr::Const(lit) => Ok(CVal::Base(lit.to_value())),
        ComprExpr::Op(op, args) => {
            let vals =
                args.iter().map(|a| go(db, a, env)).collect::<Result<Vec<_>, _>>()?;
            prim_op(*op, vals)
        }
        ComprExpr::For(x, src, body) => {
            let items = bag(go(db, src, env)?)?;
            let mut out = Vec::new();
            let mut env = env.clone();
            for item in items {
                env.insert(x.clone(), item);
                out.extend(bag(go(db, body, &env)?)?);
            }
            Ok(CVal::Bag(out))
        }
        ComprExpr::Cond(t, b) => match go(db, t, env)? {
            CVal::Base(Value::B(true)) => go(db, b, env),
            CVal::Base(Value::B(false)) => Ok(CVal::Bag(Vec::new())),
            v => Err(ComprError::TypeMismatch(format!("`{v:?}` is not a condition"))),
        },
        ComprExpr::Yield(v) => Ok(CVal::Bag(vec![go(db, v, env)?])),
        ComprExpr::Exists(b) => {
            let items = bag(go(db, b, env)?)?;
            Ok(CVal::Base(Value::B(!items.is_empty())))
        }
        ComprExpr::Table(name) => {
            let table =
                db.get(name).ok_or_else(|| ComprError::UnknownTable(name.clone()))?;
            let rows = table
                .rows
                .iter()
                .map(|row| {
                    CVal::Rec(
                        table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(col, cell)| {
                                (col.clone(), cell.clone().map_or(CVal::Null, CVal::Base))
                            })
                            .collect(),
                    )
                })
                .collect();
            Ok(CVal::Bag(rows))
        }
        ComprExpr::Empty => Ok(CVal::Bag(Vec::new())),
    }
}

fn bag(v: CVal) -> Result<Vec<CVal>, ComprError> {
    match v {
        CVal::Bag(items) => Ok(items),
        v => Err(ComprError::TypeMismatch(format!("expected a bag, found {v:?}"))),
    }
}

fn prim_op(op: POp, vals: Vec<CVal>) -> Result<CVal, ComprError> {
    use CVal::{Base, Null};
    use Value::{B, I};
    let b = |x| Ok(Base(B(x)));
    match (op, vals.as_slice()) {
        (POp::Not, [Base(B(x))]) => b(!x),
        (POp::And, [Base(B(l)), Base(B(r))]) => b(*l && *r),
        (POp::Gt, [Base(I(l)), Base(I(r))]) => b(l > r),
        (POp::Sub, [Base(I(l)), Base(I(r))]) => Ok(Base(I(l - r))),
        // NULL equals nothing, so missing foreign keys match no row.
        (POp::Eq, [Null, _]) | (POp::Eq, [_, Null]) => b(false),
        (POp::Eq, [Base(l), Base(r)]) if std::mem::discriminant(l) == std::mem::discriminant(r) => {
            b(l == r)
        }
        _ => Err(ComprError::TypeMismatch(format!("{op:?} on {vals:?}"))),
    }
}
