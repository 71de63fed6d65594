//! SQL rendering.
//!
//! One statement per line: `SELECT … FROM T AS t0 INNER JOIN … WHERE …;`.
//! An empty conjunction prints as `WHERE True`; with several conjuncts each
//! one is parenthesized unless already self-delimiting (`NOT(..)`,
//! `EXISTS(..)`).

use super::gen::{JoinCond, SqlExpr, SqlQuery};
use crate::model::Lit;
use crate::Quote;

pub fn print_sql(q: &SqlQuery, quote: Quote) -> String {
    format!("{};", query(q, quote))
}

fn query(q: &SqlQuery, quote: Quote) -> String {
    let select: Vec<_> = q.select.iter().map(|e| expr(e, quote)).collect();
    let mut out = format!("SELECT {}", select.join(", "));
    if let Some(f) = &q.from {
        out.push_str(&format!(" FROM {} AS {}", f.table, f.alias));
    }
    for j in &q.joins {
        out.push_str(&format!(" INNER JOIN {} AS {}", j.table, j.alias));
        match &j.cond {
            JoinCond::Using { column, .. } => out.push_str(&format!(" USING {column}")),
            JoinCond::On { left, right } => out.push_str(&format!(
                " ON {}.{} = {}.{}",
                left.alias, left.column, right.alias, right.column
            )),
        }
    }
    out.push_str(" WHERE ");
    if q.where_.is_empty() {
        out.push_str("True");
    } else if let [single] = q.where_.as_slice() {
        out.push_str(&expr(single, quote));
    } else {
        let conjuncts: Vec<_> = q.where_.iter().map(|e| conjunct(e, quote)).collect();
        out.push_str(&conjuncts.join(" AND "));
    }
    out
}

fn conjunct(e: &SqlExpr, quote: Quote) -> String {
    match e {
        SqlExpr::Not(_) | SqlExpr::Exists(_) => expr(e, quote),
        _ => format!("({})", expr(e, quote)),
    }
}

fn expr(e: &SqlExpr, quote: Quote) -> String {
    match e {
        SqlExpr::Star(alias) => format!("{alias}.*"),
        SqlExpr::Col(c) => format!("{}.{}", c.alias, c.column),
        SqlExpr::Lit(Lit::Int(n)) => n.to_string(),
        SqlExpr::Lit(Lit::Bool(true)) => "True".into(),
        SqlExpr::Lit(Lit::Bool(false)) => "False".into(),
        SqlExpr::Lit(Lit::Str(s)) => quote.wrap(s),
        SqlExpr::Not(x) => format!("NOT({})", expr(x, quote)),
        SqlExpr::Gt(l, r) => format!("{} > {}", operand(l, quote), operand(r, quote)),
        SqlExpr::Eq(l, r) => format!("{} = {}", operand(l, quote), operand(r, quote)),
        SqlExpr::Sub(l, r) => format!("{} - {}", operand(l, quote), operand(r, quote)),
        SqlExpr::Exists(q) => format!("EXISTS({})", query(q, quote)),
    }
}

fn operand(e: &SqlExpr, quote: Quote) -> String {
    match e {
        SqlExpr::Gt(..) | SqlExpr::Eq(..) | SqlExpr::Sub(..) => format!("({})", expr(e, quote)),
        _ => expr(e, quote),
    }
}

#[cfg(test)]
mod tests {
    use super::super::gen::gen_sql;
    use super::*;
    use crate::ast::elaborate_query;
    use crate::model::load_schema;
    use crate::parser::parse_query;

    fn sql(schema_text: &str, query: &str) -> String {
        let schema = load_schema(schema_text).unwrap();
        let q = elaborate_query(&parse_query(query).unwrap(), &schema).unwrap();
        print_sql(&gen_sql(&schema, schema.pk_map(), &q).unwrap(), Quote::Double)
    }

    #[test]
    fn age_differences_prints_joins_and_bare_single_conjunct() {
        let got = sql(
            include_str!("../../tests/data/couples.schema"),
            "getAll(couples >>> filtered((fst >>> age) > (snd >>> age)) >>> ((fst >>> name) *** ((fst >>> age) - (snd >>> age))))",
        );
        assert_eq!(
            got,
            "SELECT t1.name, t1.age - t2.age FROM Couple AS t0 \
             INNER JOIN Person AS t1 ON t0.fst = t1.name \
             INNER JOIN Person AS t2 ON t0.snd = t2.name \
             WHERE t1.age > t2.age;"
        );
    }

    #[test]
    fn expertise_prints_nested_correlated_subqueries() {
        let got = sql(
            include_str!("../../tests/data/org.schema"),
            "getAll(departments >>> filtered(all(employees, nonEmpty(tasks >>> filtered(tsk == \"abstract\")))) >>> dpt)",
        );
        assert_eq!(
            got,
            "SELECT t0.dpt FROM Department AS t0 WHERE \
             NOT(EXISTS(SELECT t2.* FROM Employee AS t2 WHERE \
             NOT(EXISTS(SELECT t5.* FROM Task AS t5 WHERE \
             (t5.tsk = \"abstract\") AND (t2.emp = t5.emp))) \
             AND (t0.dpt = t2.dpt)));"
        );
    }

    #[test]
    fn fold_chains_join_using_the_parent_key_and_default_to_where_true() {
        let got = sql(
            include_str!("../../tests/data/org.schema"),
            "getAll(departments >>> employees >>> tasks >>> tsk)",
        );
        assert_eq!(
            got,
            "SELECT t2.tsk FROM Department AS t0 \
             INNER JOIN Employee AS t1 USING dpt \
             INNER JOIN Task AS t2 USING emp \
             WHERE True;"
        );
    }
}
