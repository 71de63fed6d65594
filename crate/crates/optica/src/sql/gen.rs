//! Triplet-to-SQL generation.
//!
//! The trie is refined with deterministic aliases (`t0`, `t1`, … in
//! depth-first insertion order; one shared counter runs through nested
//! subqueries). Each subquery selects FROM its first path not bound by an
//! enclosing scope and joins the remaining new paths; fold edges join USING
//! the parent's primary-key column, entity getter edges join ON
//! parent.field = child.pk. A nested subquery whose FROM path hangs off an
//! outer path is correlated by an appended equality, outer alias first.

use std::collections::BTreeMap;

use super::triplet::{to_triplet, TExpr, TPath, Triplet, Trie};
use super::SqlError;
use crate::ast::{QueryOp, TQuery};
use crate::model::{Lit, ModelType, OpticKind, PkMap, Schema};

/// Alias assignment for every path of a trie.
pub type RefinedTrie = BTreeMap<TPath, String>;

/// Assign fresh aliases to all paths of a non-empty trie.
pub fn fresh(trie: &Trie) -> Result<RefinedTrie, SqlError> {
    if trie.is_empty() {
        return Err(SqlError::EmptyTrie);
    }
    let mut counter = 0;
    Ok(fresh_from(trie, &mut counter))
}

fn fresh_from(trie: &Trie, counter: &mut usize) -> RefinedTrie {
    let mut out = BTreeMap::new();
    for path in trie.paths() {
        out.insert(path, format!("t{}", *counter));
        *counter += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub select: Vec<SqlExpr>,
    pub from: Option<SqlFrom>,
    pub joins: Vec<SqlJoin>,
    /// Conjunction; empty means True.
    pub where_: Vec<SqlExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlFrom {
    pub table: String,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlJoin {
    pub table: String,
    pub alias: String,
    pub cond: JoinCond,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinCond {
    /// Fold edge: both sides carry the parent's pk column. The parent alias
    /// does not appear in printed SQL but drives execution.
    Using { column: String, parent: String },
    /// Entity getter/affine edge: parent.field = child.pk.
    On { left: ColRef, right: ColRef },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColRef {
    pub alias: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SqlExpr {
    /// `alias.*`
    Star(String),
    Col(ColRef),
    Lit(Lit),
    Not(Box<SqlExpr>),
    Gt(Box<SqlExpr>, Box<SqlExpr>),
    Eq(Box<SqlExpr>, Box<SqlExpr>),
    Sub(Box<SqlExpr>, Box<SqlExpr>),
    Exists(Box<SqlQuery>),
}

pub fn gen_sql(schema: &Schema, pk: &PkMap, query: &TQuery) -> Result<SqlQuery, SqlError> {
    // Only getAll queries select row bags.
    if query.op != QueryOp::GetAll {
        return Err(SqlError::NoRootFold);
    }
    if !is_flat(schema, &query.optic.part) {
        return Err(SqlError::NotFlatPart(query.optic.part.to_string()));
    }
    let triplet = to_triplet(schema, query);
    check_no_fold_proj(schema, &triplet)?;
    if triplet.trie.is_empty() {
        return Err(SqlError::NoRootFold);
    }
    let mut counter = 0;
    generate(schema, pk, &triplet, &RefinedTrie::new(), &mut counter)
}

/// Flat types have a fixed column shape: base types, entities whose prims
/// are all base-typed getters or affines, and pairs of flat types.
fn is_flat(schema: &Schema, t: &ModelType) -> bool {
    match t {
        ModelType::Int | ModelType::Bool | ModelType::Str => true,
        ModelType::Pair(a, b) => is_flat(schema, a) && is_flat(schema, b),
        ModelType::Entity(entity) => schema
            .prims_of(entity)
            .all(|p| p.part.is_base() && p.kind != OpticKind::Fold),
    }
}

fn check_no_fold_proj(schema: &Schema, t: &Triplet) -> Result<(), SqlError> {
    for e in t.selection.iter().chain(&t.restrictions) {
        check_expr(schema, e)?;
    }
    Ok(())
}

fn check_expr(schema: &Schema, e: &TExpr) -> Result<(), SqlError> {
    match e {
        TExpr::Proj(_, name) => {
            let prim = schema.prim(name).expect("elaborated prims exist");
            if prim.kind == OpticKind::Fold {
                return Err(SqlError::FoldOverBase(name.clone()));
            }
            Ok(())
        }
        TExpr::Path(_) | TExpr::Lit(_) => Ok(()),
        TExpr::Not(x) => check_expr(schema, x),
        TExpr::Gt(l, r) | TExpr::Eq(l, r) | TExpr::Sub(l, r) => {
            check_expr(schema, l)?;
            check_expr(schema, r)
        }
        TExpr::Exists(inner) => check_no_fold_proj(schema, inner),
    }
}

/// The entity a non-empty path lands on.
fn entity_of(schema: &Schema, path: &[String]) -> String {
    let prim = schema.prim(path.last().expect("non-empty path")).expect("elaborated prims exist");
    prim.part.entity_name().expect("trie paths land on entities").to_string()
}

fn pk_of(pk: &PkMap, entity: &str) -> Result<String, SqlError> {
    pk.get(entity).cloned().ok_or_else(|| SqlError::MissingPk(entity.to_string()))
}

fn generate(
    schema: &Schema,
    pk: &PkMap,
    t: &Triplet,
    outer: &RefinedTrie,
    counter: &mut usize,
) -> Result<SqlQuery, SqlError> {
    // Refine the whole trie; enclosing assignments win on shared paths.
    let mut scope = fresh_from(&t.trie, counter);
    for (path, alias) in outer {
        scope.insert(path.clone(), alias.clone());
    }

    let new_paths: Vec<TPath> =
        t.trie.paths().into_iter().filter(|p| !outer.contains_key(p)).collect();

    let mut from = None;
    let mut joins = Vec::new();
    let mut correlation = None;
    for (i, path) in new_paths.iter().enumerate() {
        let table = entity_of(schema, path);
        let alias = scope[path].clone();
        if i == 0 {
            if path.len() > 1 {
                correlation = Some(correlate(schema, pk, path, &scope)?);
            } else {
                let prim = schema.prim(path.last().unwrap()).expect("elaborated prims exist");
                debug_assert_eq!(prim.kind, OpticKind::Fold, "depth-1 paths are the root fold");
            }
            from = Some(SqlFrom { table, alias });
        } else {
            joins.push(SqlJoin { table, alias, cond: join_cond(schema, pk, path, &scope)? });
        }
    }

    let select = t
        .selection
        .iter()
        .map(|e| sql_expr(schema, pk, e, &scope, counter))
        .collect::<Result<_, _>>()?;
    let mut where_: Vec<SqlExpr> = t
        .restrictions
        .iter()
        .map(|e| sql_expr(schema, pk, e, &scope, counter))
        .collect::<Result<_, _>>()?;
    if let Some(eq) = correlation {
        where_.push(eq);
    }
    Ok(SqlQuery { select, from, joins, where_ })
}

/// Join condition for a new path whose parent is already in scope.
fn join_cond(
    schema: &Schema,
    pk: &PkMap,
    path: &[String],
    scope: &RefinedTrie,
) -> Result<JoinCond, SqlError> {
    let (last, parent) = path.split_last().expect("joined paths are nested");
    assert!(!parent.is_empty(), "only one path can sit at the root");
    let prim = schema.prim(last).expect("elaborated prims exist");
    let parent_alias = scope[parent].clone();
    let alias = scope[path].clone();
    if prim.kind == OpticKind::Fold {
        let column = pk_of(pk, &entity_of(schema, parent))?;
        Ok(JoinCond::Using { column, parent: parent_alias })
    } else {
        let child_pk = pk_of(pk, &entity_of(schema, path))?;
        Ok(JoinCond::On {
            left: ColRef { alias: parent_alias, column: last.clone() },
            right: ColRef { alias, column: child_pk },
        })
    }
}

/// Correlation equality tying a subquery's FROM path to its outer parent,
/// outer alias first.
fn correlate(
    schema: &Schema,
    pk: &PkMap,
    path: &[String],
    scope: &RefinedTrie,
) -> Result<SqlExpr, SqlError> {
    let cond = join_cond(schema, pk, path, scope)?;
    let (left, right) = match cond {
        JoinCond::Using { column, parent } => (
            ColRef { alias: parent, column: column.clone() },
            ColRef { alias: scope[path].clone(), column },
        ),
        JoinCond::On { left, right } => (left, right),
    };
    Ok(SqlExpr::Eq(Box::new(SqlExpr::Col(left)), Box::new(SqlExpr::Col(right))))
}

fn sql_expr(
    schema: &Schema,
    pk: &PkMap,
    e: &TExpr,
    scope: &RefinedTrie,
    counter: &mut usize,
) -> Result<SqlExpr, SqlError> {
    Ok(match e {
        TExpr::Path(path) => SqlExpr::Star(scope[path].clone()),
        TExpr::Proj(path, name) => {
            SqlExpr::Col(ColRef { alias: scope[path].clone(), column: name.clone() })
        }
        TExpr::Lit(lit) => SqlExpr::Lit(lit.clone()),
        TExpr::Not(x) => SqlExpr::Not(Box::new(sql_expr(schema, pk, x, scope, counter)?)),
        TExpr::Gt(l, r) => SqlExpr::Gt(
            Box::new(sql_expr(schema, pk, l, scope, counter)?),
            Box::new(sql_expr(schema, pk, r, scope, counter)?),
        ),
        TExpr::Eq(l, r) => SqlExpr::Eq(
            Box::new(sql_expr(schema, pk, l, scope, counter)?),
            Box::new(sql_expr(schema, pk, r, scope, counter)?),
        ),
        TExpr::Sub(l, r) => SqlExpr::Sub(
            Box::new(sql_expr(schema, pk, l, scope, counter)?),
            Box::new(sql_expr(schema, pk, r, scope, counter)?),
        ),
        TExpr::Exists(inner) => {
            SqlExpr::Exists(Box::new(generate(schema, pk, inner, scope, counter)?))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::elaborate_query;
    use crate::model::load_schema;
    use crate::parser::parse_query;

    fn gen(schema_text: &str, query: &str) -> Result<SqlQuery, SqlError> {
        let schema = load_schema(schema_text).unwrap();
        let q = elaborate_query(&parse_query(query).unwrap(), &schema).unwrap();
        gen_sql(&schema, schema.pk_map(), &q)
    }

    #[test]
    fn fresh_numbers_paths_depth_first_in_insertion_order() {
        let schema = load_schema(include_str!("../../tests/data/couples.schema")).unwrap();
        let q = elaborate_query(
            &parse_query("getAll(couples >>> ((fst >>> age) *** (snd >>> age)))").unwrap(),
            &schema,
        )
        .unwrap();
        let t = to_triplet(&schema, &q);
        let rho = fresh(&t.trie).unwrap();
        let path = |ps: &[&str]| ps.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(rho[&path(&["couples"])], "t0");
        assert_eq!(rho[&path(&["couples", "fst"])], "t1");
        assert_eq!(rho[&path(&["couples", "snd"])], "t2");
        assert_eq!(fresh(&Trie::default()).unwrap_err(), SqlError::EmptyTrie);
    }

    #[test]
    fn flat_entity_and_base_parts_generate() {
        let sql = gen(
            include_str!("../../tests/data/org.schema"),
            "getAll(departments >>> employees >>> tasks)",
        )
        .unwrap();
        assert_eq!(sql.select, vec![SqlExpr::Star("t2".into())]);
        assert_eq!(sql.from, Some(SqlFrom { table: "Department".into(), alias: "t0".into() }));
        assert_eq!(
            sql.joins,
            vec![
                SqlJoin {
                    table: "Employee".into(),
                    alias: "t1".into(),
                    cond: JoinCond::Using { column: "dpt".into(), parent: "t0".into() },
                },
                SqlJoin {
                    table: "Task".into(),
                    alias: "t2".into(),
                    cond: JoinCond::Using { column: "emp".into(), parent: "t1".into() },
                },
            ]
        );
        assert!(sql.where_.is_empty());
    }

    #[test]
    fn preconditions_reject_unflattenable_queries() {
        let couples = include_str!("../../tests/data/couples.schema");
        assert_eq!(
            gen(couples, "getAll(couples)").unwrap_err(),
            SqlError::NotFlatPart("Couple".into())
        );
        assert_eq!(gen(couples, "get(nonEmpty(couples))").unwrap_err(), SqlError::NoRootFold);
        assert_eq!(
            gen(couples, "preview(filtered(nonEmpty(couples)) >>> nonEmpty(couples))").unwrap_err(),
            SqlError::NoRootFold
        );
        assert_eq!(gen(couples, "getAll(to_fl(to_af(like(1))))").unwrap_err(), SqlError::NoRootFold);

        // A base-typed fold prim has no relational form.
        let org_variant = include_str!("../../tests/data/org.schema")
            .replace("optic emp : getter Employee String", "optic emp : fold Employee String")
            .replace("pk Employee emp\n", "");
        assert_eq!(
            gen(&org_variant, "getAll(departments >>> employees >>> emp)").unwrap_err(),
            SqlError::FoldOverBase("emp".into())
        );

        let no_pk = couples.replace("pk Person name\n", "");
        assert_eq!(
            gen(&no_pk, "getAll(couples >>> fst >>> age)").unwrap_err(),
            SqlError::MissingPk("Person".into())
        );
    }
}
