//! Seeded random generation of documents and well-typed optic expressions,
//! shared by the integration suites.
//!
//! Expressions are built top-down against a concrete source type, so every
//! produced tree elaborates successfully by construction; generation tracks
//! the kind and part each subtree will be assigned so casts are only applied
//! where they are legal.

#![allow(dead_code)]

use optica::ast::{QueryOp, RawExpr, RawQuery};
use optica::model::{Lit, ModelType, OpticKind, Prim, Schema, Value};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// String pool shared by literal and document generation, so equality tests
/// hit with useful probability.
const STRINGS: [&str; 6] = ["a", "b", "c", "abstract", "build", "call"];

pub struct Gen<'a> {
    pub rng: ChaCha8Rng,
    schema: &'a Schema,
}

impl<'a> Gen<'a> {
    pub fn new(schema: &'a Schema, seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), schema }
    }

    fn base_value(&mut self, base: &ModelType) -> Value {
        match base {
            ModelType::Int => Value::I(self.rng.gen_range(0..=9)),
            ModelType::Bool => Value::B(self.rng.gen()),
            ModelType::Str => Value::S((*STRINGS.choose(&mut self.rng).unwrap()).into()),
            _ => unreachable!("base types only"),
        }
    }

    fn lit(&mut self, base: &ModelType) -> Lit {
        match self.base_value(base) {
            Value::I(n) => Lit::Int(n),
            Value::B(b) => Lit::Bool(b),
            Value::S(s) => Lit::Str(s),
            _ => unreachable!(),
        }
    }

    fn any_base(&mut self) -> ModelType {
        [ModelType::Int, ModelType::Bool, ModelType::Str]
            .choose(&mut self.rng)
            .unwrap()
            .clone()
    }

    fn prims_of(&self, entity: &ModelType) -> Vec<Prim> {
        match entity.entity_name() {
            Some(name) => self.schema.prims_of(name).cloned().collect(),
            None => Vec::new(),
        }
    }

    /// A random document following the schema, every list capped at
    /// `max_fanout` elements.
    pub fn doc(&mut self, max_fanout: usize) -> Value {
        let root = self.schema.root_prim().clone();
        let n = self.rng.gen_range(0..=max_fanout);
        let entity = root.part.clone();
        Value::L((0..n).map(|_| self.entity_value(&entity, max_fanout)).collect())
    }

    fn entity_value(&mut self, entity: &ModelType, max_fanout: usize) -> Value {
        let name = entity.entity_name().expect("entity fields reference entities");
        let fields = self
            .prims_of(entity)
            .into_iter()
            .map(|p| {
                let value = match p.kind {
                    OpticKind::Getter => self.field_value(&p.part, max_fanout),
                    OpticKind::Affine => {
                        let n = self.rng.gen_range(0..=1);
                        Value::L((0..n).map(|_| self.field_value(&p.part, max_fanout)).collect())
                    }
                    OpticKind::Fold => {
                        let n = self.rng.gen_range(0..=max_fanout);
                        Value::L((0..n).map(|_| self.field_value(&p.part, max_fanout)).collect())
                    }
                };
                (p.name, value)
            })
            .collect();
        Value::R(name.to_string(), fields)
    }

    fn field_value(&mut self, part: &ModelType, max_fanout: usize) -> Value {
        if part.is_base() {
            self.base_value(part)
        } else {
            self.entity_value(part, max_fanout)
        }
    }

    /// A getter from `whole` whose part is the base type `base`.
    pub fn base_getter(&mut self, whole: &ModelType, base: &ModelType, depth: usize) -> RawExpr {
        use RawExpr::*;
        let mut options: Vec<u8> = vec![0, 0];
        if whole == base {
            options.push(1);
        }
        let direct: Vec<Prim> = self
            .prims_of(whole)
            .into_iter()
            .filter(|p| p.kind == OpticKind::Getter && &p.part == base)
            .collect();
        if !direct.is_empty() {
            options.extend([2, 2]);
        }
        let hops: Vec<Prim> = self
            .prims_of(whole)
            .into_iter()
            .filter(|p| p.kind == OpticKind::Getter)
            .collect();
        if depth > 0 {
            if !hops.is_empty() {
                options.extend([3, 3]);
            }
            match base {
                ModelType::Bool => options.extend([4, 5, 6, 7, 8]),
                ModelType::Int => options.push(9),
                _ => {}
            }
        }
        match options.choose(&mut self.rng).unwrap() {
            0 => Like(self.lit(base)),
            1 => IdOptic,
            2 => Name(direct.choose(&mut self.rng).unwrap().name.clone()),
            3 => {
                let hop = hops.choose(&mut self.rng).unwrap().clone();
                let rest = self.base_getter(&hop.part, base, depth - 1);
                Seq(Box::new(Name(hop.name)), Box::new(rest))
            }
            4 => Not(Box::new(self.base_getter(whole, &ModelType::Bool, depth - 1))),
            5 => {
                let l = self.base_getter(whole, &ModelType::Int, depth - 1);
                let r = self.base_getter(whole, &ModelType::Int, depth - 1);
                Gt(Box::new(l), Box::new(r))
            }
            6 => {
                let b = self.any_base();
                let l = self.base_getter(whole, &b, depth - 1);
                let r = self.base_getter(whole, &b, depth - 1);
                Eq(Box::new(l), Box::new(r))
            }
            7 => {
                let (f, _, _) = self.optic(whole, depth - 1);
                NonEmpty(Box::new(f))
            }
            8 => {
                let (f, _, part) = self.optic(whole, depth - 1);
                let p = self.base_getter(&part, &ModelType::Bool, depth.saturating_sub(2));
                if self.rng.gen() {
                    All(Box::new(f), Box::new(p))
                } else {
                    Any(Box::new(f), Box::new(p))
                }
            }
            9 => {
                let l = self.base_getter(whole, &ModelType::Int, depth - 1);
                let r = self.base_getter(whole, &ModelType::Int, depth - 1);
                Sub(Box::new(l), Box::new(r))
            }
            _ => unreachable!(),
        }
    }

    /// A getter from `whole` with an arbitrary part; returns the part type.
    pub fn any_getter(&mut self, whole: &ModelType, depth: usize) -> (RawExpr, ModelType) {
        use RawExpr::*;
        let entity_hops: Vec<Prim> = self
            .prims_of(whole)
            .into_iter()
            .filter(|p| p.kind == OpticKind::Getter && !p.part.is_base())
            .collect();
        let mut options: Vec<u8> = vec![0, 0, 1];
        if depth > 0 {
            options.push(2);
            if !entity_hops.is_empty() {
                options.extend([3, 3]);
            }
        }
        match options.choose(&mut self.rng).unwrap() {
            0 => {
                let base = self.any_base();
                (self.base_getter(whole, &base, depth), base)
            }
            1 => (IdOptic, whole.clone()),
            2 => {
                let (l, pl) = self.any_getter(whole, depth - 1);
                let (r, pr) = self.any_getter(whole, depth - 1);
                (
                    Fork(Box::new(l), Box::new(r)),
                    ModelType::Pair(Box::new(pl), Box::new(pr)),
                )
            }
            3 => {
                let hop = entity_hops.choose(&mut self.rng).unwrap().clone();
                if self.rng.gen_bool(0.4) {
                    (Name(hop.name), hop.part)
                } else {
                    let (rest, part) = self.any_getter(&hop.part, depth - 1);
                    (Seq(Box::new(Name(hop.name)), Box::new(rest)), part)
                }
            }
            _ => unreachable!(),
        }
    }

    /// A chain of schema prims from `whole` extended until it ends at a base
    /// part. `None` when `whole` has no prims to start from.
    pub fn base_chain(&mut self, whole: &ModelType, depth: usize) -> Option<(RawExpr, ModelType, OpticKind)> {
        let prims = self.prims_of(whole);
        let p = prims.choose(&mut self.rng)?.clone();
        let mut expr = RawExpr::Name(p.name);
        let mut part = p.part;
        let mut kind = p.kind;
        let mut left = depth;
        while !part.is_base() {
            let next = self
                .prims_of(&part)
                .into_iter()
                .filter(|n| left > 0 || n.part.is_base())
                .collect::<Vec<_>>();
            // Leaf entities end at base parts, so the unfiltered set is never
            // empty and the filter can only bite while budget remains.
            let n = match next.choose(&mut self.rng) {
                Some(n) => n.clone(),
                None => self.prims_of(&part).first().cloned().expect("entities bottom out at base parts"),
            };
            expr = RawExpr::Seq(Box::new(expr), Box::new(RawExpr::Name(n.name)));
            kind = kind.max(n.kind);
            part = n.part;
            left = left.saturating_sub(1);
        }
        Some((expr, part, kind))
    }

    /// A random well-typed optic from `whole`: any kind, any part. Returns
    /// the kind and part the elaborator will assign.
    pub fn optic(&mut self, whole: &ModelType, depth: usize) -> (RawExpr, OpticKind, ModelType) {
        use RawExpr::*;
        let prims = self.prims_of(whole);
        let mut options: Vec<u8> = vec![0, 1];
        if !prims.is_empty() {
            options.extend([2, 2, 2]);
        }
        if depth > 0 {
            options.extend([3, 3, 3, 4, 5, 6, 6, 7, 8, 9, 10]);
            if whole.entity_name().is_some() {
                options.push(11);
            }
        }
        match options.choose(&mut self.rng).unwrap() {
            0 => (IdOptic, OpticKind::Getter, whole.clone()),
            1 => {
                let base = self.any_base();
                (Like(self.lit(&base)), OpticKind::Getter, base)
            }
            2 => {
                let p = prims.choose(&mut self.rng).unwrap().clone();
                (Name(p.name), p.kind, p.part)
            }
            3 => {
                let (l, kl, mid) = self.optic(whole, depth - 1);
                let (r, kr, part) = self.optic(&mid, depth - 1);
                (Seq(Box::new(l), Box::new(r)), kl.max(kr), part)
            }
            4 => {
                let (l, pl) = self.any_getter(whole, depth - 1);
                let (r, pr) = self.any_getter(whole, depth - 1);
                (
                    Fork(Box::new(l), Box::new(r)),
                    OpticKind::Getter,
                    ModelType::Pair(Box::new(pl), Box::new(pr)),
                )
            }
            5 => {
                let p = self.base_getter(whole, &ModelType::Bool, depth - 1);
                (Not(Box::new(p)), OpticKind::Getter, ModelType::Bool)
            }
            6 => {
                let p = self.base_getter(whole, &ModelType::Bool, depth - 1);
                (Filtered(Box::new(p)), OpticKind::Affine, whole.clone())
            }
            7 => {
                let (f, _, _) = self.optic(whole, depth - 1);
                (NonEmpty(Box::new(f)), OpticKind::Getter, ModelType::Bool)
            }
            8 => {
                let (g, part) = self.any_getter(whole, depth - 1);
                (ToAf(Box::new(g)), OpticKind::Affine, part)
            }
            9 => {
                let (inner, part) = if self.rng.gen() {
                    let (g, part) = self.any_getter(whole, depth - 1);
                    (g, part)
                } else {
                    let p = self.base_getter(whole, &ModelType::Bool, depth - 1);
                    (Filtered(Box::new(p)), whole.clone())
                };
                (ToFl(Box::new(inner)), OpticKind::Fold, part)
            }
            10 => {
                let (f, _, part) = self.optic(whole, depth - 1);
                match self.rng.gen_range(0..3) {
                    0 => (Empty(Box::new(f)), OpticKind::Getter, ModelType::Bool),
                    1 => {
                        let p = self.base_getter(&part, &ModelType::Bool, depth.saturating_sub(2));
                        (All(Box::new(f), Box::new(p)), OpticKind::Getter, ModelType::Bool)
                    }
                    _ => {
                        let p = self.base_getter(&part, &ModelType::Bool, depth.saturating_sub(2));
                        (Any(Box::new(f), Box::new(p)), OpticKind::Getter, ModelType::Bool)
                    }
                }
            }
            11 => match self.base_chain(whole, depth - 1) {
                Some((f, base, _)) => {
                    let lit = self.lit(&base);
                    (Elem(Box::new(f), lit), OpticKind::Getter, ModelType::Bool)
                }
                None => (IdOptic, OpticKind::Getter, whole.clone()),
            },
            _ => unreachable!(),
        }
    }

    /// A random well-typed query anchored at the schema root; the operation
    /// is drawn from those the optic's kind admits.
    pub fn query(&mut self, depth: usize) -> RawQuery {
        let root = self.schema.root_type();
        let (optic, kind, _) = self.optic(&root, depth);
        let op = match kind {
            OpticKind::Getter => *[QueryOp::Get, QueryOp::Preview, QueryOp::GetAll]
                .choose(&mut self.rng)
                .unwrap(),
            OpticKind::Affine => *[QueryOp::Preview, QueryOp::GetAll].choose(&mut self.rng).unwrap(),
            OpticKind::Fold => QueryOp::GetAll,
        };
        RawQuery { op, optic }
    }

    /// A `getAll` query that enters the store through the root prim; used
    /// where translation requires the trie to be populated.
    pub fn rooted_get_all(&mut self, depth: usize) -> RawQuery {
        let root = self.schema.root_prim().clone();
        let (tail, _, _) = self.optic(&root.part, depth);
        RawQuery {
            op: QueryOp::GetAll,
            optic: RawExpr::Seq(Box::new(RawExpr::Name(root.name)), Box::new(tail)),
        }
    }
}

/// Number of columns a part of this type occupies when laid out flat.
pub fn flat_width(t: &ModelType) -> usize {
    match t {
        ModelType::Pair(l, r) => flat_width(l) + flat_width(r),
        _ => 1,
    }
}

/// Multiset equality of relational rows, compared by rendered cells.
pub fn same_rows(mut a: Vec<String>, mut b: Vec<String>) -> bool {
    a.sort();
    b.sort();
    a == b
}

pub fn render_rows(rows: &[Vec<optica::model::Cell>]) -> Vec<String> {
    rows.iter().map(|row| format!("{row:?}")).collect()
}
