//! Optic expressions: the surface tree, derived-form expansion, and the
//! elaborator that assigns kinds and types.
//!
//! Elaboration inserts upcasts automatically (`getter` to `affine` to `fold`)
//! so that both sides of a composition agree on a kind; downcasts are type
//! errors. Derived forms (`empty`, `all`, `any`, `elem`) expand literally into
//! core constructors before elaboration — no simplification is applied.

use std::fmt;

use thiserror::Error;

use crate::model::{Lit, ModelType, OpticKind, Schema};

/// Surface expression as parsed; derived forms are still folded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawExpr {
    Name(String),
    IdOptic,
    Like(Lit),
    Seq(Box<RawExpr>, Box<RawExpr>),
    Fork(Box<RawExpr>, Box<RawExpr>),
    Not(Box<RawExpr>),
    Gt(Box<RawExpr>, Box<RawExpr>),
    Eq(Box<RawExpr>, Box<RawExpr>),
    Sub(Box<RawExpr>, Box<RawExpr>),
    Filtered(Box<RawExpr>),
    NonEmpty(Box<RawExpr>),
    ToAf(Box<RawExpr>),
    ToFl(Box<RawExpr>),
    Empty(Box<RawExpr>),
    All(Box<RawExpr>, Box<RawExpr>),
    Any(Box<RawExpr>, Box<RawExpr>),
    Elem(Box<RawExpr>, Lit),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryOp {
    Get,
    Preview,
    GetAll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawQuery {
    pub op: QueryOp,
    pub optic: RawExpr,
}

/// Expand derived forms into core constructors, literally and recursively.
pub fn desugar(e: &RawExpr) -> RawExpr {
    use RawExpr::*;
    let b = |e: &RawExpr| Box::new(desugar(e));
    match e {
        Name(_) | IdOptic | Like(_) => e.clone(),
        Seq(l, r) => Seq(b(l), b(r)),
        Fork(l, r) => Fork(b(l), b(r)),
        Not(x) => Not(b(x)),
        Gt(l, r) => Gt(b(l), b(r)),
        Eq(l, r) => Eq(b(l), b(r)),
        Sub(l, r) => Sub(b(l), b(r)),
        Filtered(p) => Filtered(b(p)),
        NonEmpty(f) => NonEmpty(b(f)),
        ToAf(x) => ToAf(b(x)),
        ToFl(x) => ToFl(b(x)),
        // empty fl = fl.nonEmpty.not
        Empty(f) => Not(Box::new(NonEmpty(b(f)))),
        // all fl p = empty(fl >>> filtered(p.not))
        All(f, p) => Not(Box::new(NonEmpty(Box::new(Seq(
            b(f),
            Box::new(ToFl(Box::new(Filtered(Box::new(Not(b(p))))))),
        ))))),
        // any fl p = all(fl, p.not).not
        Any(f, p) => desugar(&Not(Box::new(All(f.clone(), Box::new(Not(p.clone())))))),
        // elem fl a = any(fl, id == like a)
        Elem(f, a) => desugar(&Any(
            f.clone(),
            Box::new(Eq(Box::new(IdOptic), Box::new(Like(a.clone())))),
        )),
    }
}

pub fn desugar_query(q: &RawQuery) -> RawQuery {
    RawQuery { op: q.op, optic: desugar(&q.optic) }
}

/// Drop cast nodes, for comparing trees modulo casts.
pub fn strip_casts(e: &RawExpr) -> RawExpr {
    use RawExpr::*;
    let b = |e: &RawExpr| Box::new(strip_casts(e));
    match e {
        ToAf(x) | ToFl(x) => strip_casts(x),
        Name(_) | IdOptic | Like(_) => e.clone(),
        Seq(l, r) => Seq(b(l), b(r)),
        Fork(l, r) => Fork(b(l), b(r)),
        Not(x) => Not(b(x)),
        Gt(l, r) => Gt(b(l), b(r)),
        Eq(l, r) => Eq(b(l), b(r)),
        Sub(l, r) => Sub(b(l), b(r)),
        Filtered(p) => Filtered(b(p)),
        NonEmpty(f) => NonEmpty(b(f)),
        Empty(f) => Empty(b(f)),
        All(f, p) => All(b(f), b(p)),
        Any(f, p) => Any(b(f), b(p)),
        Elem(f, a) => Elem(b(f), a.clone()),
    }
}

/// A fully elaborated optic: every node knows its kind and its (ground)
/// source and target types. Both children of a `Seq` share the node's kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TOptic {
    pub kind: OpticKind,
    pub whole: ModelType,
    pub part: ModelType,
    pub node: TNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TNode {
    Id,
    Prim(String),
    Seq(Box<TOptic>, Box<TOptic>),
    Fork(Box<TOptic>, Box<TOptic>),
    Like(Lit),
    Not(Box<TOptic>),
    Gt(Box<TOptic>, Box<TOptic>),
    Eq(Box<TOptic>, Box<TOptic>),
    Sub(Box<TOptic>, Box<TOptic>),
    Filtered(Box<TOptic>),
    NonEmpty(Box<TOptic>),
    ToAf(Box<TOptic>),
    ToFl(Box<TOptic>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TQuery {
    pub op: QueryOp,
    pub optic: TOptic,
}

/// Rebuild the surface form of an elaborated optic (casts included).
pub fn raw_of(t: &TOptic) -> RawExpr {
    let b = |t: &TOptic| Box::new(raw_of(t));
    match &t.node {
        TNode::Id => RawExpr::IdOptic,
        TNode::Prim(name) => RawExpr::Name(name.clone()),
        TNode::Seq(l, r) => RawExpr::Seq(b(l), b(r)),
        TNode::Fork(l, r) => RawExpr::Fork(b(l), b(r)),
        TNode::Like(lit) => RawExpr::Like(lit.clone()),
        TNode::Not(x) => RawExpr::Not(b(x)),
        TNode::Gt(l, r) => RawExpr::Gt(b(l), b(r)),
        TNode::Eq(l, r) => RawExpr::Eq(b(l), b(r)),
        TNode::Sub(l, r) => RawExpr::Sub(b(l), b(r)),
        TNode::Filtered(p) => RawExpr::Filtered(b(p)),
        TNode::NonEmpty(f) => RawExpr::NonEmpty(b(f)),
        TNode::ToAf(x) => RawExpr::ToAf(b(x)),
        TNode::ToFl(x) => RawExpr::ToFl(b(x)),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unknown optic `{0}`")]
    UnknownPrim(String),
    #[error("cannot unify `{left}` with `{right}`")]
    Mismatch { left: String, right: String },
    #[error("{context} needs a {expected}, found a {found} (no downcast)")]
    KindMismatch { context: &'static str, expected: OpticKind, found: OpticKind },
    #[error("`==` compares base values, found `{0}`")]
    NonBaseEq(String),
    #[error("type is ambiguous: `{0}` never meets a concrete source")]
    Ambiguous(String),
}

/// Inferred type of an optic, with unresolved sources shown as variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpticScheme {
    pub kind: OpticKind,
    pub whole: String,
    pub part: String,
}

impl fmt::Display for OpticScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.kind, self.whole, self.part)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryScheme {
    pub op: QueryOp,
    pub whole: String,
    pub part: String,
}

impl fmt::Display for QueryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            QueryOp::Get => write!(f, "{} -> {}", self.whole, self.part),
            QueryOp::Preview => write!(f, "{} -> option {}", self.whole, self.part),
            QueryOp::GetAll => write!(f, "{} -> list {}", self.whole, self.part),
        }
    }
}

/// Infer the type of an optic without pinning its source to the schema root.
pub fn check_optic(e: &RawExpr, schema: &Schema) -> Result<OpticScheme, TypeError> {
    let mut elab = Elab::new(schema);
    let u = elab.optic(&desugar(e))?;
    let mut names = VarNames::new();
    Ok(OpticScheme {
        kind: u.kind,
        whole: elab.render(&u.whole, &mut names),
        part: elab.render(&u.part, &mut names),
    })
}

pub fn check_query(q: &RawQuery, schema: &Schema) -> Result<QueryScheme, TypeError> {
    let mut elab = Elab::new(schema);
    let u = elab.query(&desugar_query(q))?;
    let mut names = VarNames::new();
    Ok(QueryScheme {
        op: q.op,
        whole: elab.render(&u.optic.whole, &mut names),
        part: elab.render(&u.optic.part, &mut names),
    })
}

/// Elaborate an optic whose source must be the schema root.
pub fn elaborate_optic(e: &RawExpr, schema: &Schema) -> Result<TOptic, TypeError> {
    elaborate_optic_at(e, schema, &schema.root_type())
}

/// Elaborate an optic against an explicit source type.
pub fn elaborate_optic_at(e: &RawExpr, schema: &Schema, whole: &ModelType) -> Result<TOptic, TypeError> {
    let mut elab = Elab::new(schema);
    let u = elab.optic(&desugar(e))?;
    elab.unify(&u.whole, &Ty::of(whole))?;
    elab.ground_optic(&u)
}

pub fn elaborate_query(q: &RawQuery, schema: &Schema) -> Result<TQuery, TypeError> {
    let mut elab = Elab::new(schema);
    let u = elab.query(&desugar_query(q))?;
    elab.unify(&u.optic.whole, &Ty::of(&schema.root_type()))?;
    Ok(TQuery { op: u.op, optic: elab.ground_optic(&u.optic)? })
}

/// Inference types: model types extended with unification variables.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Str,
    Pair(Box<Ty>, Box<Ty>),
    Entity(String),
    Var(u32),
}

impl Ty {
    fn of(t: &ModelType) -> Ty {
        match t {
            ModelType::Int => Ty::Int,
            ModelType::Bool => Ty::Bool,
            ModelType::Str => Ty::Str,
            ModelType::Pair(l, r) => Ty::Pair(Box::new(Ty::of(l)), Box::new(Ty::of(r))),
            ModelType::Entity(name) => Ty::Entity(name.clone()),
        }
    }
}

/// An optic annotated with inference types.
struct UOptic {
    kind: OpticKind,
    whole: Ty,
    part: Ty,
    node: UNode,
}

enum UNode {
    Id,
    Prim(String),
    Seq(Box<UOptic>, Box<UOptic>),
    Fork(Box<UOptic>, Box<UOptic>),
    Like(Lit),
    Not(Box<UOptic>),
    Gt(Box<UOptic>, Box<UOptic>),
    Eq(Box<UOptic>, Box<UOptic>),
    Sub(Box<UOptic>, Box<UOptic>),
    Filtered(Box<UOptic>),
    NonEmpty(Box<UOptic>),
    ToAf(Box<UOptic>),
    ToFl(Box<UOptic>),
}

struct UQuery {
    op: QueryOp,
    optic: UOptic,
}

/// Greek names for display of unification variables, by first appearance.
struct VarNames(Vec<u32>);

impl VarNames {
    fn new() -> Self {
        VarNames(Vec::new())
    }

    fn name(&mut self, var: u32) -> String {
        const GREEK: [&str; 8] = ["α", "β", "γ", "δ", "ε", "ζ", "η", "θ"];
        let idx = match self.0.iter().position(|&v| v == var) {
            Some(idx) => idx,
            None => {
                self.0.push(var);
                self.0.len() - 1
            }
        };
        GREEK.get(idx).map(|s| s.to_string()).unwrap_or_else(|| format!("τ{idx}"))
    }
}

struct Elab<'a> {
    schema: &'a Schema,
    subst: Vec<Option<Ty>>,
}

impl<'a> Elab<'a> {
    fn new(schema: &'a Schema) -> Self {
        Elab { schema, subst: Vec::new() }
    }

    fn fresh(&mut self) -> Ty {
        self.subst.push(None);
        Ty::Var(self.subst.len() as u32 - 1)
    }

    /// Resolve the outermost variable chain.
    fn shallow(&self, t: &Ty) -> Ty {
        let mut t = t.clone();
        while let Ty::Var(v) = t {
            match &self.subst[v as usize] {
                Some(bound) => t = bound.clone(),
                None => break,
            }
        }
        t
    }

    fn deep(&self, t: &Ty) -> Ty {
        match self.shallow(t) {
            Ty::Pair(l, r) => Ty::Pair(Box::new(self.deep(&l)), Box::new(self.deep(&r))),
            other => other,
        }
    }

    fn occurs(&self, var: u32, t: &Ty) -> bool {
        match self.shallow(t) {
            Ty::Var(v) => v == var,
            Ty::Pair(l, r) => self.occurs(var, &l) || self.occurs(var, &r),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty) -> Result<(), TypeError> {
        let (a, b) = (self.shallow(a), self.shallow(b));
        match (&a, &b) {
            (Ty::Var(v), Ty::Var(w)) if v == w => Ok(()),
            (Ty::Var(v), _) if !self.occurs(*v, &b) => {
                self.subst[*v as usize] = Some(b);
                Ok(())
            }
            (_, Ty::Var(w)) if !self.occurs(*w, &a) => {
                self.subst[*w as usize] = Some(a);
                Ok(())
            }
            (Ty::Int, Ty::Int) | (Ty::Bool, Ty::Bool) | (Ty::Str, Ty::Str) => Ok(()),
            (Ty::Entity(x), Ty::Entity(y)) if x == y => Ok(()),
            (Ty::Pair(al, ar), Ty::Pair(bl, br)) => {
                self.unify(al, bl)?;
                self.unify(ar, br)
            }
            _ => {
                let mut names = VarNames::new();
                Err(TypeError::Mismatch {
                    left: self.render(&a, &mut names),
                    right: self.render(&b, &mut names),
                })
            }
        }
    }

    fn render(&self, t: &Ty, names: &mut VarNames) -> String {
        match self.shallow(t) {
            Ty::Int => "Int".into(),
            Ty::Bool => "Bool".into(),
            Ty::Str => "String".into(),
            Ty::Entity(name) => name,
            Ty::Pair(l, r) => format!("({}, {})", self.render(&l, names), self.render(&r, names)),
            Ty::Var(v) => names.name(v),
        }
    }

    /// Wrap `e` in the casts that lift it to kind `target` (never downcasts).
    fn up(&self, e: UOptic, target: OpticKind) -> UOptic {
        assert!(e.kind <= target, "upcasts only");
        match (e.kind, target) {
            (from, to) if from == to => e,
            (OpticKind::Getter, OpticKind::Affine) => UOptic {
                kind: OpticKind::Affine,
                whole: e.whole.clone(),
                part: e.part.clone(),
                node: UNode::ToAf(Box::new(e)),
            },
            (OpticKind::Affine, OpticKind::Fold) => UOptic {
                kind: OpticKind::Fold,
                whole: e.whole.clone(),
                part: e.part.clone(),
                node: UNode::ToFl(Box::new(e)),
            },
            (OpticKind::Getter, OpticKind::Fold) => {
                let affine = self.up(e, OpticKind::Affine);
                self.up(affine, OpticKind::Fold)
            }
            _ => unreachable!(),
        }
    }

    fn getter_operand(&mut self, e: &RawExpr, context: &'static str) -> Result<UOptic, TypeError> {
        let u = self.optic(e)?;
        if u.kind != OpticKind::Getter {
            return Err(TypeError::KindMismatch {
                context,
                expected: OpticKind::Getter,
                found: u.kind,
            });
        }
        Ok(u)
    }

    fn optic(&mut self, e: &RawExpr) -> Result<UOptic, TypeError> {
        match e {
            RawExpr::Name(name) => {
                let prim = self.schema.prim(name).ok_or_else(|| TypeError::UnknownPrim(name.clone()))?;
                Ok(UOptic {
                    kind: prim.kind,
                    whole: Ty::Entity(prim.whole.clone()),
                    part: Ty::of(&prim.part),
                    node: UNode::Prim(name.clone()),
                })
            }
            RawExpr::IdOptic => {
                let a = self.fresh();
                Ok(UOptic { kind: OpticKind::Getter, whole: a.clone(), part: a, node: UNode::Id })
            }
            RawExpr::Like(lit) => Ok(UOptic {
                kind: OpticKind::Getter,
                whole: self.fresh(),
                part: Ty::of(&lit.base_type()),
                node: UNode::Like(lit.clone()),
            }),
            RawExpr::Seq(l, r) => {
                let ul = self.optic(l)?;
                let ur = self.optic(r)?;
                self.unify(&ul.part, &ur.whole)?;
                let kind = ul.kind.max(ur.kind);
                let (whole, part) = (ul.whole.clone(), ur.part.clone());
                let (ul, ur) = (self.up(ul, kind), self.up(ur, kind));
                Ok(UOptic { kind, whole, part, node: UNode::Seq(Box::new(ul), Box::new(ur)) })
            }
            RawExpr::Fork(l, r) => {
                let ul = self.getter_operand(l, "`***`")?;
                let ur = self.getter_operand(r, "`***`")?;
                self.unify(&ul.whole, &ur.whole)?;
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: ul.whole.clone(),
                    part: Ty::Pair(Box::new(ul.part.clone()), Box::new(ur.part.clone())),
                    node: UNode::Fork(Box::new(ul), Box::new(ur)),
                })
            }
            RawExpr::Not(x) => {
                let u = self.getter_operand(x, "`.not`")?;
                self.unify(&u.part, &Ty::Bool)?;
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: u.whole.clone(),
                    part: Ty::Bool,
                    node: UNode::Not(Box::new(u)),
                })
            }
            RawExpr::Gt(l, r) => {
                let (ul, ur) = self.int_operands(l, r, "`>`")?;
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: ul.whole.clone(),
                    part: Ty::Bool,
                    node: UNode::Gt(Box::new(ul), Box::new(ur)),
                })
            }
            RawExpr::Eq(l, r) => {
                let ul = self.getter_operand(l, "`==`")?;
                let ur = self.getter_operand(r, "`==`")?;
                self.unify(&ul.whole, &ur.whole)?;
                self.unify(&ul.part, &ur.part)?;
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: ul.whole.clone(),
                    part: Ty::Bool,
                    node: UNode::Eq(Box::new(ul), Box::new(ur)),
                })
            }
            RawExpr::Sub(l, r) => {
                let (ul, ur) = self.int_operands(l, r, "`-`")?;
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: ul.whole.clone(),
                    part: Ty::Int,
                    node: UNode::Sub(Box::new(ul), Box::new(ur)),
                })
            }
            RawExpr::Filtered(p) => {
                let u = self.getter_operand(p, "filtered")?;
                self.unify(&u.part, &Ty::Bool)?;
                Ok(UOptic {
                    kind: OpticKind::Affine,
                    whole: u.whole.clone(),
                    part: u.whole.clone(),
                    node: UNode::Filtered(Box::new(u)),
                })
            }
            RawExpr::NonEmpty(f) => {
                let u = self.optic(f)?;
                let u = self.up(u, OpticKind::Fold);
                Ok(UOptic {
                    kind: OpticKind::Getter,
                    whole: u.whole.clone(),
                    part: Ty::Bool,
                    node: UNode::NonEmpty(Box::new(u)),
                })
            }
            RawExpr::ToAf(x) => {
                let u = self.optic(x)?;
                if u.kind != OpticKind::Getter {
                    return Err(TypeError::KindMismatch {
                        context: "to_af",
                        expected: OpticKind::Getter,
                        found: u.kind,
                    });
                }
                Ok(self.up(u, OpticKind::Affine))
            }
            RawExpr::ToFl(x) => {
                let u = self.optic(x)?;
                if u.kind == OpticKind::Fold {
                    return Err(TypeError::KindMismatch {
                        context: "to_fl",
                        expected: OpticKind::Affine,
                        found: u.kind,
                    });
                }
                Ok(self.up(u, OpticKind::Fold))
            }
            RawExpr::Empty(_) | RawExpr::All(_, _) | RawExpr::Any(_, _) | RawExpr::Elem(_, _) => {
                unreachable!("derived forms are desugared before elaboration")
            }
        }
    }

    /// Shared operand shape of `>` and `-`: two Int getters over one source.
    fn int_operands(
        &mut self,
        l: &RawExpr,
        r: &RawExpr,
        context: &'static str,
    ) -> Result<(UOptic, UOptic), TypeError> {
        let ul = self.getter_operand(l, context)?;
        let ur = self.getter_operand(r, context)?;
        self.unify(&ul.whole, &ur.whole)?;
        self.unify(&ul.part, &Ty::Int)?;
        self.unify(&ur.part, &Ty::Int)?;
        Ok((ul, ur))
    }

    fn query(&mut self, q: &RawQuery) -> Result<UQuery, TypeError> {
        let u = self.optic(&q.optic)?;
        let optic = match q.op {
            QueryOp::Get => {
                if u.kind != OpticKind::Getter {
                    return Err(TypeError::KindMismatch {
                        context: "get",
                        expected: OpticKind::Getter,
                        found: u.kind,
                    });
                }
                u
            }
            QueryOp::Preview => {
                if u.kind == OpticKind::Fold {
                    return Err(TypeError::KindMismatch {
                        context: "preview",
                        expected: OpticKind::Affine,
                        found: u.kind,
                    });
                }
                self.up(u, OpticKind::Affine)
            }
            QueryOp::GetAll => self.up(u, OpticKind::Fold),
        };
        Ok(UQuery { op: q.op, optic })
    }

    fn ground_ty(&self, t: &Ty) -> Result<ModelType, TypeError> {
        match self.deep(t) {
            Ty::Int => Ok(ModelType::Int),
            Ty::Bool => Ok(ModelType::Bool),
            Ty::Str => Ok(ModelType::Str),
            Ty::Entity(name) => Ok(ModelType::Entity(name)),
            Ty::Pair(l, r) => Ok(ModelType::Pair(
                Box::new(self.ground_ty(&l)?),
                Box::new(self.ground_ty(&r)?),
            )),
            Ty::Var(_) => {
                let mut names = VarNames::new();
                Err(TypeError::Ambiguous(self.render(t, &mut names)))
            }
        }
    }

    fn ground_optic(&self, u: &UOptic) -> Result<TOptic, TypeError> {
        let b = |x: &UOptic| -> Result<Box<TOptic>, TypeError> { Ok(Box::new(self.ground_optic(x)?)) };
        let node = match &u.node {
            UNode::Id => TNode::Id,
            UNode::Prim(name) => TNode::Prim(name.clone()),
            UNode::Seq(l, r) => TNode::Seq(b(l)?, b(r)?),
            UNode::Fork(l, r) => TNode::Fork(b(l)?, b(r)?),
            UNode::Like(lit) => TNode::Like(lit.clone()),
            UNode::Not(x) => TNode::Not(b(x)?),
            UNode::Gt(l, r) => TNode::Gt(b(l)?, b(r)?),
            UNode::Eq(l, r) => {
                let (l, r) = (b(l)?, b(r)?);
                if !l.part.is_base() {
                    return Err(TypeError::NonBaseEq(l.part.to_string()));
                }
                TNode::Eq(l, r)
            }
            UNode::Sub(l, r) => TNode::Sub(b(l)?, b(r)?),
            UNode::Filtered(p) => TNode::Filtered(b(p)?),
            UNode::NonEmpty(f) => TNode::NonEmpty(b(f)?),
            UNode::ToAf(x) => TNode::ToAf(b(x)?),
            UNode::ToFl(x) => TNode::ToFl(b(x)?),
        };
        Ok(TOptic {
            kind: u.kind,
            whole: self.ground_ty(&u.whole)?,
            part: self.ground_ty(&u.part)?,
            node,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_schema;

    fn couples() -> Schema {
        load_schema(include_str!("../tests/data/couples.schema")).unwrap()
    }

    fn org() -> Schema {
        load_schema(include_str!("../tests/data/org.schema")).unwrap()
    }

    fn name(n: &str) -> Box<RawExpr> {
        Box::new(RawExpr::Name(n.into()))
    }

    #[test]
    fn elem_expands_to_double_negated_emptiness_check() {
        use RawExpr::*;
        let fl = Seq(name("tasks"), name("tsk"));
        let got = desugar(&Elem(Box::new(fl.clone()), Lit::Str("abstract".into())));
        let want = Not(Box::new(Not(Box::new(NonEmpty(Box::new(Seq(
            Box::new(fl),
            Box::new(ToFl(Box::new(Filtered(Box::new(Not(Box::new(Not(Box::new(Eq(
                Box::new(IdOptic),
                Box::new(Like(Lit::Str("abstract".into()))),
            )))))))))),
        )))))));
        assert_eq!(got, want);
    }

    #[test]
    fn check_leaves_unconstrained_sources_polymorphic() {
        let scheme = check_optic(&RawExpr::Like(Lit::Int(1)), &couples()).unwrap();
        assert_eq!(scheme.to_string(), "getter α Int");
        let q = RawQuery { op: QueryOp::Get, optic: RawExpr::Like(Lit::Int(1)) };
        assert_eq!(check_query(&q, &couples()).unwrap().to_string(), "α -> Int");
    }

    #[test]
    fn seq_upcasts_getter_after_fold() {
        let e = RawExpr::Seq(name("couples"), name("fst"));
        let t = elaborate_optic(&e, &couples()).unwrap();
        assert_eq!(t.kind, OpticKind::Fold);
        match &t.node {
            TNode::Seq(l, r) => {
                assert!(matches!(l.node, TNode::Prim(ref n) if n == "couples"));
                match &r.node {
                    TNode::ToFl(inner) => assert!(matches!(inner.node, TNode::ToAf(_))),
                    other => panic!("expected to_fl(to_af(fst)), found {other:?}"),
                }
            }
            other => panic!("expected a composition, found {other:?}"),
        }
    }

    #[test]
    fn fork_rejects_non_getter_children() {
        let e = RawExpr::Fork(name("couples"), name("couples"));
        let err = elaborate_optic(&e, &couples()).unwrap_err();
        assert_eq!(
            err,
            TypeError::KindMismatch {
                context: "`***`",
                expected: OpticKind::Getter,
                found: OpticKind::Fold,
            }
        );
    }

    #[test]
    fn get_rejects_wider_kinds() {
        let q = RawQuery { op: QueryOp::Get, optic: RawExpr::Name("couples".into()) };
        let err = elaborate_query(&q, &couples()).unwrap_err();
        assert!(matches!(err, TypeError::KindMismatch { context: "get", .. }));
    }

    #[test]
    fn eq_on_entities_is_rejected() {
        let e = RawExpr::Seq(
            name("couples"),
            Box::new(RawExpr::Filtered(Box::new(RawExpr::Eq(name("fst"), name("snd"))))),
        );
        let err = elaborate_optic(&e, &couples()).unwrap_err();
        assert_eq!(err, TypeError::NonBaseEq("Person".into()));
    }

    #[test]
    fn composition_chains_unify_across_entities() {
        let e = RawExpr::Seq(Box::new(RawExpr::Seq(name("departments"), name("employees"))), name("emp"));
        let t = elaborate_optic(&e, &org()).unwrap();
        assert_eq!(t.kind, OpticKind::Fold);
        assert_eq!(t.whole, ModelType::Entity("Org".into()));
        assert_eq!(t.part, ModelType::Str);
        let mismatched = RawExpr::Seq(name("departments"), name("tsk"));
        assert!(matches!(elaborate_optic(&mismatched, &org()), Err(TypeError::Mismatch { .. })));
    }
}
