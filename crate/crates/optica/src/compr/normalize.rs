//! Comprehension normalization and normal-form comparison.
//!
//! Rewrites to a fixpoint, innermost first: beta reduction, record
//! projection, `for` over `yield`/`for`/`if`/empty, constant conditionals,
//! `exists` of syntactically empty or singleton bags, and double-negation
//! collapse. A step budget guards against divergence — exceeding it is an
//! error, never a silent partial result.

use std::collections::BTreeSet;

use super::{ComprError, ComprExpr, POp};

pub const DEFAULT_BUDGET: usize = 100_000;

pub fn normalize(e: &ComprExpr) -> Result<ComprExpr, ComprError> {
    normalize_with_budget(e, DEFAULT_BUDGET)
}

pub fn normalize_with_budget(e: &ComprExpr, budget: usize) -> Result<ComprExpr, ComprError> {
    let mut st = St { left: budget, budget, next: next_rename_index(e) };
    norm(e, &mut st)
}

struct St {
    left: usize,
    budget: usize,
    next: usize,
}

impl St {
    fn spend(&mut self) -> Result<(), ComprError> {
        if self.left == 0 {
            return Err(ComprError::Budget(self.budget));
        }
        self.left -= 1;
        Ok(())
    }

    fn fresh(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!("r{n}")
    }
}

/// Seed the rename counter past any `rN` already in the term.
fn next_rename_index(e: &ComprExpr) -> usize {
    fn scan(e: &ComprExpr, max: &mut usize) {
        let mut name = |n: &str| {
            if let Some(idx) = n.strip_prefix('r').and_then(|s| s.parse::<usize>().ok()) {
                *max = (*max).max(idx + 1);
            }
        };
        match e {
            ComprExpr::Var(x) => name(x),
            ComprExpr::Lam(x, b) => {
                name(x);
                scan(b, max);
            }
            ComprExpr::For(x, s, b) => {
                name(x);
                scan(s, max);
                scan(b, max);
            }
            ComprExpr::App(l, r) | ComprExpr::Cond(l, r) => {
                scan(l, max);
                scan(r, max);
            }
            ComprExpr::Record(fs) => fs.iter().for_each(|(_, v)| scan(v, max)),
            ComprExpr::Op(_, args) => args.iter().for_each(|a| scan(a, max)),
            ComprExpr::Field(x, _) | ComprExpr::Yield(x) | ComprExpr::Exists(x) => scan(x, max),
            ComprExpr::Const(_) | ComprExpr::Table(_) | ComprExpr::Empty => {}
        }
    }
    let mut max = 0;
    scan(e, &mut max);
    max
}

fn norm(e: &ComprExpr, st: &mut St) -> Result<ComprExpr, ComprError> {
    use ComprExpr::*;
    let e = match e {
        Var(_) | Const(_) | Table(_) | Empty => e.clone(),
        Lam(x, b) => Lam(x.clone(), Box::new(norm(b, st)?)),
        App(f, a) => App(Box::new(norm(f, st)?), Box::new(norm(a, st)?)),
        Record(fs) => Record(
            fs.iter().map(|(n, v)| Ok((n.clone(), norm(v, st)?))).collect::<Result<_, _>>()?,
        ),
        Field(r, f) => Field(Box::new(norm(r, st)?), f.clone()),
        Op(op, args) => {
            Op(*op, args.iter().map(|a| norm(a, st)).collect::<Result<_, _>>()?)
        }
        For(x, s, b) => For(x.clone(), Box::new(norm(s, st)?), Box::new(norm(b, st)?)),
        Cond(t, b) => Cond(Box::new(norm(t, st)?), Box::new(norm(b, st)?)),
        Yield(v) => Yield(Box::new(norm(v, st)?)),
        Exists(b) => Exists(Box::new(norm(b, st)?)),
    };
    if let Some(next) = contract(&e, st)? {
        st.spend()?;
        debug_assert!(
            free_vars(&next).is_subset(&free_vars(&e)),
            "rewrite must not free new variables"
        );
        // A contraction may expose redexes anywhere in the result.
        return norm(&next, st);
    }
    Ok(e)
}

fn contract(e: &ComprExpr, st: &mut St) -> Result<Option<ComprExpr>, ComprError> {
    use ComprExpr::*;
    Ok(match e {
        App(f, a) => match f.as_ref() {
            Lam(x, b) => Some(subst(b, x, a, st)),
            _ => None,
        },
        Field(r, f) => match r.as_ref() {
            Record(fields) => {
                let (_, v) = fields
                    .iter()
                    .find(|(n, _)| n == f)
                    .ok_or_else(|| ComprError::UnknownField(f.clone()))?;
                Some(v.clone())
            }
            _ => None,
        },
        For(x, src, body) => match src.as_ref() {
            Yield(v) => Some(subst(body, x, v, st)),
            Empty => Some(Empty),
            For(y, s2, b2) => {
                // for x in (for y in s2 do b2) do body
                //   → for y in s2 do (for x in b2 do body)
                // renaming y when body mentions it.
                let (y2, b2) = if free_vars(body).contains(y) {
                    let ny = st.fresh();
                    (ny.clone(), subst(b2, y, &Var(ny), st))
                } else {
                    (y.clone(), b2.as_ref().clone())
                };
                Some(For(
                    y2,
                    s2.clone(),
                    Box::new(For(x.clone(), Box::new(b2), body.clone())),
                ))
            }
            Cond(t, b) => Some(Cond(
                t.clone(),
                Box::new(For(x.clone(), b.clone(), body.clone())),
            )),
            _ => None,
        },
        Cond(t, b) => match t.as_ref() {
            Const(crate::model::Lit::Bool(true)) => Some(b.as_ref().clone()),
            Const(crate::model::Lit::Bool(false)) => Some(Empty),
            _ => None,
        },
        Exists(b) => match b.as_ref() {
            Empty => Some(Const(crate::model::Lit::Bool(false))),
            Yield(_) => Some(Const(crate::model::Lit::Bool(true))),
            _ => None,
        },
        Op(POp::Not, args) => match args.as_slice() {
            [Op(POp::Not, inner)] => Some(inner[0].clone()),
            _ => None,
        },
        _ => None,
    })
}

pub fn free_vars(e: &ComprExpr) -> BTreeSet<String> {
    fn go(e: &ComprExpr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match e {
            ComprExpr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            ComprExpr::Lam(x, b) => {
                bound.push(x.clone());
                go(b, bound, out);
                bound.pop();
            }
            ComprExpr::For(x, s, b) => {
                go(s, bound, out);
                bound.push(x.clone());
                go(b, bound, out);
                bound.pop();
            }
            ComprExpr::App(l, r) | ComprExpr::Cond(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            ComprExpr::Record(fs) => fs.iter().for_each(|(_, v)| go(v, bound, out)),
            ComprExpr::Op(_, args) => args.iter().for_each(|a| go(a, bound, out)),
            ComprExpr::Field(x, _) | ComprExpr::Yield(x) | ComprExpr::Exists(x) => {
                go(x, bound, out)
            }
            ComprExpr::Const(_) | ComprExpr::Table(_) | ComprExpr::Empty => {}
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// `e[x := v]`, renaming binders that would capture free variables of `v`.
fn subst(e: &ComprExpr, x: &str, v: &ComprExpr, st: &mut St) -> ComprExpr {
    use ComprExpr::*;
    match e {
        Var(y) if y == x => v.clone(),
        Var(_) | Const(_) | Table(_) | Empty => e.clone(),
        Lam(y, b) => {
            let (y, b) = avoid_capture(y, b, x, v, st);
            Lam(y, Box::new(b))
        }
        For(y, s, b) => {
            let s = subst(s, x, v, st);
            let (y, b) = avoid_capture(y, b, x, v, st);
            For(y, Box::new(s), Box::new(b))
        }
        App(l, r) => App(Box::new(subst(l, x, v, st)), Box::new(subst(r, x, v, st))),
        Cond(l, r) => Cond(Box::new(subst(l, x, v, st)), Box::new(subst(r, x, v, st))),
        Record(fs) => {
            Record(fs.iter().map(|(n, e)| (n.clone(), subst(e, x, v, st))).collect())
        }
        Op(op, args) => Op(*op, args.iter().map(|a| subst(a, x, v, st)).collect()),
        Field(r, f) => Field(Box::new(subst(r, x, v, st)), f.clone()),
        Yield(b) => Yield(Box::new(subst(b, x, v, st))),
        Exists(b) => Exists(Box::new(subst(b, x, v, st))),
    }
}

/// Substitute under the binder `y`, renaming it when it shadows `x` would be
/// wrong: `y == x` stops the substitution, `y ∈ FV(v)` forces a rename.
fn avoid_capture(
    y: &str,
    body: &ComprExpr,
    x: &str,
    v: &ComprExpr,
    st: &mut St,
) -> (String, ComprExpr) {
    if y == x {
        return (y.to_string(), body.clone());
    }
    if free_vars(v).contains(y) {
        let ny = st.fresh();
        let renamed = subst(body, y, &ComprExpr::Var(ny.clone()), st);
        (ny.clone(), subst(&renamed, x, v, st))
    } else {
        (y.to_string(), subst(body, x, v, st))
    }
}

/// Canonical text for normal-form comparison: binders print as de Bruijn
/// indices, chained conditionals and `&&` flatten into one sorted guard
/// multiset, and `yield` payloads inside an `exists` are erased (only
/// emptiness matters there).
pub fn canonical(e: &ComprExpr) -> String {
    canon(e, &mut Vec::new(), false)
}

pub fn alpha_guard_eq(a: &ComprExpr, b: &ComprExpr) -> bool {
    canonical(a) == canonical(b)
}

fn canon(e: &ComprExpr, env: &mut Vec<String>, erase: bool) -> String {
    use ComprExpr::*;
    match e {
        Var(x) => match env.iter().rev().position(|b| b == x) {
            Some(i) => format!("#{i}"),
            None => format!("!{x}"),
        },
        Lam(x, b) => {
            env.push(x.clone());
            let s = format!("fun -> {}", canon(b, env, erase));
            env.pop();
            s
        }
        App(f, a) => format!("({})({})", canon(f, env, erase), canon(a, env, erase)),
        Record(fs) => {
            let fields: Vec<_> = fs
                .iter()
                .map(|(n, v)| format!("{n} = {}", canon(v, env, erase)))
                .collect();
            format!("{{{}}}", fields.join(", "))
        }
        Field(r, f) => format!("{}.{f}", canon(r, env, erase)),
        Const(lit) => format!("{lit:?}"),
        Op(POp::Not, args) => format!("not({})", canon(&args[0], env, erase)),
        Op(op, args) => format!(
            "({} {op:?} {})",
            canon(&args[0], env, erase),
            canon(&args[1], env, erase)
        ),
        For(x, s, b) => {
            let src = canon(s, env, erase);
            env.push(x.clone());
            let body = canon(b, env, erase);
            env.pop();
            format!("for {src} do {body}")
        }
        Cond(..) => {
            let (guards, core) = split_guards(e);
            let mut gs: Vec<_> = guards.iter().map(|g| canon(g, env, erase)).collect();
            gs.sort();
            format!("if [{}] then {}", gs.join(" && "), canon(core, env, erase))
        }
        Yield(v) => {
            if erase {
                "yield _".into()
            } else {
                format!("yield {}", canon(v, env, erase))
            }
        }
        Exists(b) => format!("exists({})", canon(b, env, true)),
        Table(n) => format!("table({n})"),
        Empty => "[]".into(),
    }
}

/// Split `if g1 then if g2 then core` and `g1 && g2` alike into
/// ([g1, g2, …], core).
fn split_guards(e: &ComprExpr) -> (Vec<&ComprExpr>, &ComprExpr) {
    fn conjuncts<'a>(t: &'a ComprExpr, out: &mut Vec<&'a ComprExpr>) {
        match t {
            ComprExpr::Op(POp::And, args) => args.iter().for_each(|a| conjuncts(a, out)),
            _ => out.push(t),
        }
    }
    let mut guards = Vec::new();
    let mut cur = e;
    while let ComprExpr::Cond(t, b) = cur {
        conjuncts(t, &mut guards);
        cur = b;
    }
    (guards, cur)
}

/// The expertise query hand-written directly against the flat tables;
/// shared oracle for the interpreter and equivalence tests.
#[cfg(test)]
pub(crate) fn expertise_by_hand() -> ComprExpr {
    use ComprExpr::*;
    let var = |x: &str| Var(x.into());
    let field = |r: ComprExpr, f: &str| Field(Box::new(r), f.into());
    let eq = |l, r| Op(POp::Eq, vec![l, r]);
    let task_guard = Op(
        POp::And,
        vec![
            eq(field(var("e"), "emp"), field(var("t"), "emp")),
            eq(field(var("t"), "tsk"), Const(crate::model::Lit::Str("abstract".into()))),
        ],
    );
    let tasks = For(
        "t".into(),
        Box::new(Table("Task".into())),
        Box::new(Cond(Box::new(task_guard), Box::new(Yield(Box::new(field(var("t"), "tsk")))))),
    );
    let emp_guard = Op(
        POp::And,
        vec![
            eq(field(var("d"), "dpt"), field(var("e"), "dpt")),
            Op(POp::Not, vec![Exists(Box::new(tasks))]),
        ],
    );
    let emps = For(
        "e".into(),
        Box::new(Table("Employee".into())),
        Box::new(Cond(Box::new(emp_guard), Box::new(Yield(Box::new(field(var("e"), "emp")))))),
    );
    For(
        "d".into(),
        Box::new(Table("Department".into())),
        Box::new(Cond(
            Box::new(Op(POp::Not, vec![Exists(Box::new(emps))])),
            Box::new(Yield(Box::new(field(var("d"), "dpt")))),
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::super::{build_nested_adapter, compr_query, print_compr};
    use super::*;
    use crate::ast::elaborate_query;
    use crate::model::{Lit, Schema};
    use crate::parser::parse_query;

    use ComprExpr::*;

    fn var(x: &str) -> ComprExpr {
        Var(x.into())
    }
    fn lam(x: &str, b: ComprExpr) -> ComprExpr {
        Lam(x.into(), Box::new(b))
    }
    fn app(f: ComprExpr, a: ComprExpr) -> ComprExpr {
        App(Box::new(f), Box::new(a))
    }
    fn table(n: &str) -> ComprExpr {
        Table(n.into())
    }
    fn for_(x: &str, s: ComprExpr, b: ComprExpr) -> ComprExpr {
        For(x.into(), Box::new(s), Box::new(b))
    }
    fn yld(v: ComprExpr) -> ComprExpr {
        Yield(Box::new(v))
    }
    fn field(r: ComprExpr, f: &str) -> ComprExpr {
        Field(Box::new(r), f.into())
    }

    #[test]
    fn reductions_fire_to_fixpoint() {
        assert_eq!(normalize(&app(lam("x", var("x")), table("T"))).unwrap(), table("T"));
        let e = for_("x", yld(table("T")), yld(field(var("x"), "a")));
        assert_eq!(normalize(&e).unwrap(), yld(field(table("T"), "a")));
        let e = Exists(Box::new(yld(table("T"))));
        assert_eq!(normalize(&e).unwrap(), Const(Lit::Bool(true)));
        let e = Op(POp::Not, vec![Op(POp::Not, vec![var("b")])]);
        assert_eq!(normalize(&e).unwrap(), var("b"));
        assert_eq!(
            normalize(&for_("x", Empty, yld(var("x")))).unwrap(),
            Empty
        );
    }

    #[test]
    fn hoisting_renames_binders_that_would_capture() {
        // fun(y) -> for x in (for y in T do yield y) do yield {p = x, q = y}
        // must keep the outer y distinct from the loop binder.
        let inner = for_("y", table("T"), yld(var("y")));
        let body = yld(Record(vec![("p".into(), var("x")), ("q".into(), var("y"))]));
        let e = lam("y", for_("x", inner, body));
        let out = normalize(&e).unwrap();
        assert_eq!(
            print_compr(&out),
            "fun(y) -> for r0 in table(\"T\") do yield {p = r0, q = y}"
        );
    }

    #[test]
    fn the_budget_is_a_hard_stop() {
        let e = app(lam("x", var("x")), table("T"));
        assert_eq!(normalize_with_budget(&e, 0).unwrap_err(), ComprError::Budget(0));
        assert!(normalize_with_budget(&e, 1).is_ok());
    }

    fn org() -> Schema {
        crate::model::load_schema(include_str!("../../tests/data/org.schema")).unwrap()
    }

    #[test]
    fn adapted_expertise_normalizes_to_the_handwritten_comprehension() {
        let schema = org();
        let q = elaborate_query(
            &parse_query(
                "getAll(departments >>> filtered(all(employees, \
                 nonEmpty(tasks >>> filtered(tsk == \"abstract\")))) >>> dpt)",
            )
            .unwrap(),
            &schema,
        )
        .unwrap();
        let adapter = build_nested_adapter(&schema, schema.pk_map()).unwrap();
        let adapted = app(compr_query(&schema, &q), adapter);
        let ours = normalize(&adapted).unwrap();
        let theirs = normalize(&super::expertise_by_hand()).unwrap();
        assert!(
            alpha_guard_eq(&ours, &theirs),
            "normal forms differ:\n  ours:   {}\n  theirs: {}",
            canonical(&ours),
            canonical(&theirs)
        );
    }
}
