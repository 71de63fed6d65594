//! A small SQL executor over shredded tables.
//!
//! Bag semantics by nested loops, in table row order. `EXISTS` subqueries
//! see enclosing aliases, so correlated conditions resolve against the outer
//! rows. NULL follows three-valued logic: comparisons involving NULL are
//! NULL, and a row survives the WHERE conjunction only if every conjunct is
//! true outright.

use super::gen::{JoinCond, SqlExpr, SqlQuery};
use super::SqlError;
use crate::model::{Cell, Database, OpticKind, RelTable, Schema, Value};

/// `alias -> current row` bindings, innermost last.
type Scope<'a> = Vec<(&'a str, Frame<'a>)>;

#[derive(Clone, Copy)]
struct Frame<'a> {
    table: &'a RelTable,
    row: &'a [Cell],
}

pub fn exec_sql(db: &Database, q: &SqlQuery) -> Result<Vec<Vec<Cell>>, SqlError> {
    let mut scope = Scope::new();
    exec_under(db, q, &mut scope)
}

fn exec_under<'a>(
    db: &'a Database,
    q: &'a SqlQuery,
    scope: &mut Scope<'a>,
) -> Result<Vec<Vec<Cell>>, SqlError> {
    let mut sources = Vec::new();
    if let Some(f) = &q.from {
        sources.push((f.alias.as_str(), table(db, &f.table)?, None));
    }
    for j in &q.joins {
        sources.push((j.alias.as_str(), table(db, &j.table)?, Some(&j.cond)));
    }
    let mut out = Vec::new();
    product(db, q, &sources, scope, &mut out)?;
    Ok(out)
}

fn table<'a>(db: &'a Database, name: &str) -> Result<&'a RelTable, SqlError> {
    db.get(name).ok_or_else(|| SqlError::UnknownTable(name.to_string()))
}

fn product<'a>(
    db: &'a Database,
    q: &'a SqlQuery,
    sources: &[(&'a str, &'a RelTable, Option<&'a JoinCond>)],
    scope: &mut Scope<'a>,
    out: &mut Vec<Vec<Cell>>,
) -> Result<(), SqlError> {
    let Some(((alias, table, cond), rest)) = sources.split_first() else {
        if where_holds(db, &q.where_, scope)? {
            out.push(select_row(db, &q.select, scope)?);
        }
        return Ok(());
    };
    for row in &table.rows {
        scope.push((alias, Frame { table, row }));
        let keep = match cond {
            None => true,
            Some(c) => join_holds(c, scope)?,
        };
        if keep {
            product(db, q, rest, scope, out)?;
        }
        scope.pop();
    }
    Ok(())
}

fn frame<'a>(scope: &Scope<'a>, alias: &str) -> Result<Frame<'a>, SqlError> {
    scope
        .iter()
        .rev()
        .find(|(a, _)| *a == alias)
        .map(|(_, f)| *f)
        .ok_or_else(|| SqlError::UnknownAlias(alias.to_string()))
}

fn cell<'a>(scope: &Scope<'a>, alias: &str, column: &str) -> Result<&'a Cell, SqlError> {
    let f = frame(scope, alias)?;
    let idx = f.table.columns.iter().position(|c| c == column).ok_or_else(|| {
        SqlError::UnknownColumn { alias: alias.to_string(), column: column.to_string() }
    })?;
    Ok(&f.row[idx])
}

fn join_holds(cond: &JoinCond, scope: &Scope) -> Result<bool, SqlError> {
    let (l, r) = match cond {
        JoinCond::Using { column, parent } => {
            let child = scope.last().expect("joined source just pushed").0;
            (cell(scope, parent, column)?, cell(scope, child, column)?)
        }
        JoinCond::On { left, right } => {
            (cell(scope, &left.alias, &left.column)?, cell(scope, &right.alias, &right.column)?)
        }
    };
    match (l, r) {
        (Some(l), Some(r)) => Ok(eq_values(l, r)?),
        _ => Ok(false),
    }
}

fn where_holds<'a>(
    db: &'a Database,
    conj: &'a [SqlExpr],
    scope: &mut Scope<'a>,
) -> Result<bool, SqlError> {
    for e in conj {
        match eval(db, e, scope)? {
            Some(Value::B(true)) => {}
            Some(Value::B(false)) | None => return Ok(false),
            Some(v) => return Err(SqlError::TypeMismatch(format!("`{v}` is not a condition"))),
        }
    }
    Ok(true)
}

fn select_row<'a>(
    db: &'a Database,
    select: &'a [SqlExpr],
    scope: &mut Scope<'a>,
) -> Result<Vec<Cell>, SqlError> {
    let mut row = Vec::new();
    for item in select {
        match item {
            SqlExpr::Star(alias) => {
                let f = frame(scope, alias)?;
                row.extend(f.row[..f.table.decl_cols].iter().cloned());
            }
            e => row.push(eval(db, e, scope)?),
        }
    }
    Ok(row)
}

fn eval<'a>(db: &'a Database, e: &'a SqlExpr, scope: &mut Scope<'a>) -> Result<Cell, SqlError> {
    Ok(match e {
        SqlExpr::Star(alias) => {
            return Err(SqlError::TypeMismatch(format!("`{alias}.*` is not a value")))
        }
        SqlExpr::Col(c) => cell(scope, &c.alias, &c.column)?.clone(),
        SqlExpr::Lit(lit) => Some(lit.to_value()),
        SqlExpr::Not(x) => match eval(db, x, scope)? {
            None => None,
            Some(Value::B(b)) => Some(Value::B(!b)),
            Some(v) => return Err(SqlError::TypeMismatch(format!("NOT of `{v}`"))),
        },
        SqlExpr::Gt(l, r) => match (eval(db, l, scope)?, eval(db, r, scope)?) {
            (None, _) | (_, None) => None,
            (Some(Value::I(l)), Some(Value::I(r))) => Some(Value::B(l > r)),
            (Some(l), Some(r)) => {
                return Err(SqlError::TypeMismatch(format!("`{l} > {r}`")))
            }
        },
        SqlExpr::Sub(l, r) => match (eval(db, l, scope)?, eval(db, r, scope)?) {
            (None, _) | (_, None) => None,
            (Some(Value::I(l)), Some(Value::I(r))) => Some(Value::I(l - r)),
            (Some(l), Some(r)) => {
                return Err(SqlError::TypeMismatch(format!("`{l} - {r}`")))
            }
        },
        SqlExpr::Eq(l, r) => match (eval(db, l, scope)?, eval(db, r, scope)?) {
            (None, _) | (_, None) => None,
            (Some(l), Some(r)) => Some(Value::B(eq_values(&l, &r)?)),
        },
        SqlExpr::Exists(q) => Some(Value::B(!exec_under(db, q, scope)?.is_empty())),
    })
}

fn eq_values(l: &Value, r: &Value) -> Result<bool, SqlError> {
    match (l, r) {
        (Value::I(_), Value::I(_)) | (Value::B(_), Value::B(_)) | (Value::S(_), Value::S(_)) => {
            Ok(l == r)
        }
        _ => Err(SqlError::TypeMismatch(format!("`{l} = {r}`"))),
    }
}

/// Flatten a flat result value to one output row, mirroring `alias.*`
/// expansion: base values become one cell, pairs concatenate, flat entities
/// list their fields in declaration order with absent affine fields as NULL.
pub fn flatten_value(schema: &Schema, v: &Value) -> Vec<Cell> {
    match v {
        Value::I(_) | Value::B(_) | Value::S(_) => vec![Some(v.clone())],
        Value::P(a, b) => {
            let mut row = flatten_value(schema, a);
            row.extend(flatten_value(schema, b));
            row
        }
        Value::R(entity, fields) => schema
            .prims_of(entity)
            .zip(fields)
            .map(|(prim, (name, value))| {
                debug_assert_eq!(&prim.name, name);
                match prim.kind {
                    OpticKind::Getter => Some(value.clone()),
                    OpticKind::Affine => match value {
                        Value::L(items) => items.first().cloned(),
                        _ => unreachable!("affine fields are stored as lists"),
                    },
                    OpticKind::Fold => unreachable!("flat entities have no fold fields"),
                }
            })
            .collect(),
        Value::L(_) => unreachable!("lists are not flat values"),
    }
}
