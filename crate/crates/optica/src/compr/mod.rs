//! Comprehension interpretation: optics compile to function-valued
//! comprehension terms (`fun`, `for`/`do`, `if`/`then`, `yield`, `exists`)
//! over the nested data model, and a generated adapter rebuilds that nested
//! model from flat tables so the composed term can be normalized and
//! compared against hand-written comprehensions.

pub mod interp;
pub mod normalize;

use thiserror::Error;

use crate::ast::{QueryOp, TNode, TOptic, TQuery};
use crate::model::{Lit, OpticKind, PkMap, Schema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComprExpr {
    Var(String),
    /// `fun(x) -> body`
    Lam(String, Box<ComprExpr>),
    App(Box<ComprExpr>, Box<ComprExpr>),
    /// `{f1 = e1, f2 = e2}`, fields ordered.
    Record(Vec<(String, ComprExpr)>),
    Field(Box<ComprExpr>, String),
    Const(Lit),
    Op(POp, Vec<ComprExpr>),
    /// `for x in source do body`
    For(String, Box<ComprExpr>, Box<ComprExpr>),
    /// `if test then body`, else the empty bag
    Cond(Box<ComprExpr>, Box<ComprExpr>),
    Yield(Box<ComprExpr>),
    Exists(Box<ComprExpr>),
    /// A flat relation by name.
    Table(String),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum POp {
    Not,
    Gt,
    Eq,
    Sub,
    And,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComprError {
    #[error("normalization exceeded {0} rewrite steps")]
    Budget(usize),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("no table named `{0}`")]
    UnknownTable(String),
    #[error("record has no field `{0}`")]
    UnknownField(String),
    #[error("projected a field out of a bag of {0} records instead of exactly one")]
    NotSingleton(usize),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("no pk entry for entity `{0}`")]
    MissingPk(String),
    #[error("fold `{0}` selects a base type and has no flat table")]
    BaseFold(String),
}

fn app(f: ComprExpr, a: ComprExpr) -> ComprExpr {
    ComprExpr::App(Box::new(f), Box::new(a))
}

/// Compile a checked query to a function-valued comprehension term. `get`
/// keeps the getter's scalar function; `preview` and `getAll` produce
/// bag-valued functions, upcasting a scalar result by yielding it.
pub fn compr_query(schema: &Schema, q: &TQuery) -> ComprExpr {
    let kind = match q.op {
        QueryOp::Get => OpticKind::Getter,
        QueryOp::Preview => OpticKind::Affine,
        QueryOp::GetAll => OpticKind::Fold,
    };
    Translate { next: 0 }.at_kind(schema, &q.optic, kind)
}

pub fn compr_optic(schema: &Schema, o: &TOptic) -> ComprExpr {
    Translate { next: 0 }.optic(schema, o)
}

struct Translate {
    next: usize,
}

impl Translate {
    fn fresh(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!("x{n}")
    }

    fn lam(&mut self, body: impl FnOnce(&mut Self, ComprExpr) -> ComprExpr) -> ComprExpr {
        let x = self.fresh();
        let b = body(self, ComprExpr::Var(x.clone()));
        ComprExpr::Lam(x, Box::new(b))
    }

    /// Translate `o`, upcast to `kind`: a getter under an affine or fold
    /// context yields its single result.
    fn at_kind(&mut self, schema: &Schema, o: &TOptic, kind: OpticKind) -> ComprExpr {
        let f = self.optic(schema, o);
        if o.kind == OpticKind::Getter && kind != OpticKind::Getter {
            self.lam(|_, a| ComprExpr::Yield(Box::new(app(f, a))))
        } else {
            f
        }
    }

    fn optic(&mut self, schema: &Schema, o: &TOptic) -> ComprExpr {
        use ComprExpr::*;
        match &o.node {
            TNode::Id => self.lam(|_, a| a),
            TNode::Prim(name) => {
                // The root document is the bare bag of the root fold's
                // children, so the root prim is the identity; any other prim
                // projects its field of the nested record.
                let prim = schema.prim(name).expect("elaborated prims exist");
                if prim.whole == schema.root_name() {
                    self.lam(|_, a| a)
                } else {
                    let f = name.clone();
                    self.lam(move |_, a| Field(Box::new(a), f))
                }
            }
            TNode::Like(lit) => {
                let l = lit.clone();
                self.lam(move |_, _| Const(l))
            }
            TNode::Seq(g, h) => {
                if o.kind == OpticKind::Getter {
                    let gf = self.optic(schema, g);
                    let hf = self.optic(schema, h);
                    self.lam(move |_, a| app(hf, app(gf, a)))
                } else {
                    let gf = self.at_kind(schema, g, o.kind);
                    let hf = self.at_kind(schema, h, o.kind);
                    self.lam(move |t, a| {
                        let b = t.fresh();
                        let c = t.fresh();
                        For(
                            b.clone(),
                            Box::new(app(gf, a)),
                            Box::new(For(
                                c.clone(),
                                Box::new(app(hf, Var(b))),
                                Box::new(Yield(Box::new(Var(c)))),
                            )),
                        )
                    })
                }
            }
            TNode::Fork(g, h) => {
                let gf = self.optic(schema, g);
                let hf = self.optic(schema, h);
                self.lam(move |_, a| {
                    Record(vec![
                        ("_1".into(), app(gf, a.clone())),
                        ("_2".into(), app(hf, a)),
                    ])
                })
            }
            TNode::Not(g) => {
                let gf = self.optic(schema, g);
                self.lam(move |_, a| Op(POp::Not, vec![app(gf, a)]))
            }
            TNode::Gt(g, h) => self.binop(schema, POp::Gt, g, h),
            TNode::Eq(g, h) => self.binop(schema, POp::Eq, g, h),
            TNode::Sub(g, h) => self.binop(schema, POp::Sub, g, h),
            TNode::Filtered(p) => {
                let pf = self.optic(schema, p);
                self.lam(move |_, a| {
                    Cond(Box::new(app(pf, a.clone())), Box::new(Yield(Box::new(a))))
                })
            }
            TNode::NonEmpty(g) => {
                let gf = self.at_kind(schema, g, OpticKind::Fold);
                self.lam(move |_, a| Exists(Box::new(app(gf, a))))
            }
            TNode::ToAf(g) => {
                let gf = self.optic(schema, g);
                self.lam(move |_, a| Yield(Box::new(app(gf, a))))
            }
            // Options are already bags, so widening one costs nothing.
            TNode::ToFl(g) => self.at_kind(schema, g, OpticKind::Fold),
        }
    }

    fn binop(&mut self, schema: &Schema, op: POp, g: &TOptic, h: &TOptic) -> ComprExpr {
        let gf = self.optic(schema, g);
        let hf = self.optic(schema, h);
        self.lam(move |_, a| ComprExpr::Op(op, vec![app(gf, a.clone()), app(hf, a)]))
    }
}

/// Build the closed term that assembles the nested document from flat
/// tables: one `for` level per fold edge, guarded by parent key = child
/// association column, and a singleton `for` with a foreign-key guard for
/// entity-valued getters and affines.
pub fn build_nested_adapter(schema: &Schema, pk: &PkMap) -> Result<ComprExpr, ComprError> {
    let mut t = Translate { next: 0 };
    let root = schema.root_prim();
    let child = root.part.entity_name().expect("root fold lands on an entity");
    t.nested_bag(schema, pk, child, None)
}

impl Translate {
    /// `for x in table(entity) do [if parent.pcol = x.ccol then] yield {…}`
    fn nested_bag(
        &mut self,
        schema: &Schema,
        pk: &PkMap,
        entity: &str,
        link: Option<(&ComprExpr, &str, &str)>,
    ) -> Result<ComprExpr, ComprError> {
        use ComprExpr::*;
        let x = self.fresh();
        let xv = Var(x.clone());
        let record = self.nested_record(schema, pk, entity, &xv)?;
        let body = match link {
            None => Yield(Box::new(record)),
            Some((parent, pcol, ccol)) => Cond(
                Box::new(Op(
                    POp::Eq,
                    vec![
                        Field(Box::new(parent.clone()), pcol.to_string()),
                        Field(Box::new(xv), ccol.to_string()),
                    ],
                )),
                Box::new(Yield(Box::new(record))),
            ),
        };
        Ok(For(x, Box::new(Table(entity.to_string())), Box::new(body)))
    }

    fn nested_record(
        &mut self,
        schema: &Schema,
        pk: &PkMap,
        entity: &str,
        xv: &ComprExpr,
    ) -> Result<ComprExpr, ComprError> {
        let mut fields = Vec::new();
        for prim in schema.prims_of(entity) {
            let value = match (prim.kind, prim.part.entity_name()) {
                (OpticKind::Fold, None) => return Err(ComprError::BaseFold(prim.name.clone())),
                // Base columns carry over from the flat row.
                (_, None) => ComprExpr::Field(Box::new(xv.clone()), prim.name.clone()),
                (OpticKind::Fold, Some(target)) => {
                    // The child table's association column is named after the
                    // parent's pk column and joins back to it.
                    let pcol = pk
                        .get(entity)
                        .ok_or_else(|| ComprError::MissingPk(entity.to_string()))?
                        .clone();
                    self.nested_bag(schema, pk, target, Some((xv, &pcol, &pcol)))?
                }
                (_, Some(target)) => {
                    // Aggregation: the flat field is a foreign key into the
                    // target table; re-join it to nest the single record.
                    let tpk = pk
                        .get(target)
                        .ok_or_else(|| ComprError::MissingPk(target.to_string()))?
                        .clone();
                    self.nested_bag(schema, pk, target, Some((xv, &prim.name, &tpk)))?
                }
            };
            fields.push((prim.name.clone(), value));
        }
        Ok(ComprExpr::Record(fields))
    }
}

pub fn print_compr(e: &ComprExpr) -> String {
    let mut out = String::new();
    print_into(e, &mut out);
    out
}

fn print_into(e: &ComprExpr, out: &mut String) {
    match e {
        ComprExpr::Var(x) => out.push_str(x),
        ComprExpr::Lam(x, b) => {
            out.push_str(&format!("fun({x}) -> "));
            print_into(b, out);
        }
        ComprExpr::App(f, a) => {
            match f.as_ref() {
                ComprExpr::Var(_) | ComprExpr::App(..) | ComprExpr::Field(..) => print_into(f, out),
                _ => {
                    out.push('(');
                    print_into(f, out);
                    out.push(')');
                }
            }
            out.push('(');
            print_into(a, out);
            out.push(')');
        }
        ComprExpr::Record(fields) => {
            out.push('{');
            for (i, (name, value)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{name} = "));
                print_into(value, out);
            }
            out.push('}');
        }
        ComprExpr::Field(r, f) => {
            operand(r, out);
            out.push_str(&format!(".{f}"));
        }
        ComprExpr::Const(Lit::Int(n)) => out.push_str(&n.to_string()),
        ComprExpr::Const(Lit::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
        ComprExpr::Const(Lit::Str(s)) => out.push_str(&format!("{s:?}")),
        ComprExpr::Op(POp::Not, args) => {
            out.push_str("not ");
            operand(&args[0], out);
        }
        ComprExpr::Op(op, args) => {
            let sym = match op {
                POp::Gt => ">",
                POp::Eq => "=",
                POp::Sub => "-",
                POp::And => "&&",
                POp::Not => unreachable!(),
            };
            operand(&args[0], out);
            out.push_str(&format!(" {sym} "));
            operand(&args[1], out);
        }
        ComprExpr::For(x, src, body) => {
            out.push_str(&format!("for {x} in "));
            operand(src, out);
            out.push_str(" do ");
            print_into(body, out);
        }
        ComprExpr::Cond(t, b) => {
            out.push_str("if ");
            print_into(t, out);
            out.push_str(" then ");
            print_into(b, out);
        }
        ComprExpr::Yield(v) => {
            out.push_str("yield ");
            operand(v, out);
        }
        ComprExpr::Exists(b) => {
            out.push_str("exists ");
            operand(b, out);
        }
        ComprExpr::Table(name) => out.push_str(&format!("table({name:?})")),
        ComprExpr::Empty => out.push_str("[]"),
    }
}

/// Parenthesize anything that does not read as a single unit.
fn operand(e: &ComprExpr, out: &mut String) {
    match e {
        ComprExpr::Var(_)
        | ComprExpr::App(..)
        | ComprExpr::Record(_)
        | ComprExpr::Field(..)
        | ComprExpr::Const(_)
        | ComprExpr::Table(_)
        | ComprExpr::Empty => print_into(e, out),
        _ => {
            out.push('(');
            print_into(e, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{elaborate_optic_at, elaborate_query};
    use crate::model::{load_schema, ModelType};
    use crate::parser::{parse_optic, parse_query};

    fn org() -> Schema {
        load_schema(include_str!("../../tests/data/org.schema")).unwrap()
    }

    fn optic_text(schema: &Schema, whole: &str, text: &str) -> String {
        let whole = ModelType::Entity(whole.into());
        let o = elaborate_optic_at(&parse_optic(text).unwrap(), schema, &whole).unwrap();
        print_compr(&compr_optic(schema, &o))
    }

    #[test]
    fn prims_are_projections_and_the_root_fold_is_identity() {
        let schema = org();
        assert_eq!(optic_text(&schema, "Department", "dpt"), "fun(x0) -> x0.dpt");
        assert_eq!(optic_text(&schema, "Org", "departments"), "fun(x0) -> x0");
        assert_eq!(optic_text(&schema, "Department", "employees"), "fun(x0) -> x0.employees");
    }

    #[test]
    fn getter_sequences_compose_and_bag_sequences_nest_loops() {
        let schema = load_schema(include_str!("../../tests/data/couples.schema")).unwrap();
        assert_eq!(
            optic_text(&schema, "Couple", "fst >>> name"),
            "fun(x2) -> (fun(x1) -> x1.name)((fun(x0) -> x0.fst)(x2))"
        );
        let q = elaborate_query(&parse_query("getAll(couples >>> fst)").unwrap(), &schema).unwrap();
        assert_eq!(
            print_compr(&compr_query(&schema, &q)),
            "fun(x3) -> for x4 in (fun(x0) -> x0)(x3) do \
             for x5 in (fun(x2) -> yield (fun(x1) -> x1.fst)(x2))(x4) do yield x5"
        );
    }

    #[test]
    fn the_adapter_rebuilds_the_nested_document_from_flat_tables() {
        let schema = org();
        let adapter = build_nested_adapter(&schema, schema.pk_map()).unwrap();
        assert_eq!(
            print_compr(&adapter),
            "for x0 in table(\"Department\") do yield {dpt = x0.dpt, \
             employees = for x1 in table(\"Employee\") do \
             if x0.dpt = x1.dpt then yield {emp = x1.emp, \
             tasks = for x2 in table(\"Task\") do \
             if x1.emp = x2.emp then yield {tsk = x2.tsk}}}"
        );
    }

    #[test]
    fn the_couples_adapter_joins_foreign_keys_into_singleton_bags() {
        let schema = load_schema(include_str!("../../tests/data/couples.schema")).unwrap();
        let adapter = build_nested_adapter(&schema, schema.pk_map()).unwrap();
        assert_eq!(
            print_compr(&adapter),
            "for x0 in table(\"Couple\") do yield {\
             fst = for x1 in table(\"Person\") do \
             if x0.fst = x1.name then yield {name = x1.name, age = x1.age}, \
             snd = for x2 in table(\"Person\") do \
             if x0.snd = x2.name then yield {name = x2.name, age = x2.age}}"
        );
        let no_pk: PkMap = Default::default();
        assert_eq!(
            build_nested_adapter(&schema, &no_pk).unwrap_err(),
            ComprError::MissingPk("Person".into())
        );
    }
}
