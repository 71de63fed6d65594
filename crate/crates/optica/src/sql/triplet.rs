//! Optic-to-triplet normalization.
//!
//! A triplet is (selection, entity trie, restrictions). The trie records
//! which entity paths the query ranges over; the selection says what each
//! result row holds; restrictions are boolean filters. Every optic denotes a
//! total endofunction on triplets.

use crate::ast::{TNode, TOptic, TQuery};
use crate::model::{Lit, Schema};

/// A path of prim names leading to an entity variable, starting at the
/// document root (the empty path).
pub type TPath = Vec<String>;

/// Insertion-ordered entity trie; prefix-closed by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trie {
    children: Vec<(String, Trie)>,
}

impl Trie {
    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// Insert a path, creating intermediate nodes; existing nodes are kept.
    pub fn insert(&mut self, path: &[String]) {
        let Some((head, rest)) = path.split_first() else { return };
        let child = match self.children.iter_mut().find(|(name, _)| name == head) {
            Some((_, child)) => child,
            None => {
                self.children.push((head.clone(), Trie::default()));
                &mut self.children.last_mut().unwrap().1
            }
        };
        child.insert(rest);
    }

    pub fn contains(&self, path: &[String]) -> bool {
        match path.split_first() {
            None => true,
            Some((head, rest)) => self
                .children
                .iter()
                .find(|(name, _)| name == head)
                .is_some_and(|(_, child)| child.contains(rest)),
        }
    }

    /// All non-empty paths, depth-first in insertion order.
    pub fn paths(&self) -> Vec<TPath> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.walk(&mut prefix, &mut out);
        out
    }

    fn walk(&self, prefix: &mut TPath, out: &mut Vec<TPath>) {
        for (name, child) in &self.children {
            prefix.push(name.clone());
            out.push(prefix.clone());
            child.walk(prefix, out);
            prefix.pop();
        }
    }

    /// Union, keeping left insertion order and appending unseen right paths.
    pub fn merge(&mut self, other: &Trie) {
        for (name, child) in &other.children {
            match self.children.iter_mut().find(|(n, _)| n == name) {
                Some((_, mine)) => mine.merge(child),
                None => self.children.push((name.clone(), child.clone())),
            }
        }
    }
}

/// Selection and restriction expressions over trie paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TExpr {
    /// A whole entity row at a path.
    Path(TPath),
    /// A base column of the entity at a path; the name is a prim name.
    Proj(TPath, String),
    Lit(Lit),
    Not(Box<TExpr>),
    Gt(Box<TExpr>, Box<TExpr>),
    Eq(Box<TExpr>, Box<TExpr>),
    Sub(Box<TExpr>, Box<TExpr>),
    /// Non-emptiness of a snapshot triplet (becomes EXISTS).
    Exists(Triplet),
}

/// A doubled negation cancels in the boolean domain.
fn tnot(e: TExpr) -> TExpr {
    match e {
        TExpr::Not(inner) => *inner,
        other => TExpr::Not(Box::new(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub selection: Vec<TExpr>,
    pub trie: Trie,
    pub restrictions: Vec<TExpr>,
}

impl Triplet {
    /// The translation seed: focused at the document root, nothing selected
    /// from the store yet, no restrictions.
    pub fn empty() -> Triplet {
        Triplet { selection: vec![TExpr::Path(Vec::new())], trie: Trie::default(), restrictions: Vec::new() }
    }

    fn single(&self) -> &TExpr {
        debug_assert_eq!(self.selection.len(), 1, "operands select exactly one expression");
        &self.selection[0]
    }
}

/// Observer invoked after each translation step with the sub-optic just
/// translated and the triplet state it produced.
pub type Observer<'a> = &'a mut dyn FnMut(&TOptic, &Triplet);

pub fn to_triplet(schema: &Schema, query: &TQuery) -> Triplet {
    to_triplet_observed(schema, query, &mut |_, _| {})
}

pub fn to_triplet_observed(schema: &Schema, query: &TQuery, observe: Observer) -> Triplet {
    trans(schema, &query.optic, Triplet::empty(), observe)
}

/// Apply one optic's endofunction to a triplet.
pub fn apply(schema: &Schema, optic: &TOptic, input: Triplet) -> Triplet {
    trans(schema, optic, input, &mut |_, _| {})
}

fn trans(schema: &Schema, optic: &TOptic, input: Triplet, observe: Observer) -> Triplet {
    let out = match &optic.node {
        TNode::Id => input,
        TNode::Prim(name) => {
            let prim = schema.prim(name).expect("elaborated prims exist");
            let path = match input.selection.as_slice() {
                [TExpr::Path(path)] => path.clone(),
                other => unreachable!("prims refine an entity focus, found {other:?}"),
            };
            let mut trie = input.trie;
            let selection = if prim.part.is_base() {
                // Base part: refine the focus to a column of the same row.
                vec![TExpr::Proj(path, name.clone())]
            } else {
                let mut extended = path;
                extended.push(name.clone());
                trie.insert(&extended);
                vec![TExpr::Path(extended)]
            };
            Triplet { selection, trie, restrictions: input.restrictions }
        }
        TNode::Seq(l, r) => {
            let mid = trans(schema, l, input, observe);
            trans(schema, r, mid, observe)
        }
        TNode::Fork(l, r) => {
            let cl = trans(schema, l, input.clone(), observe);
            let cr = trans(schema, r, input, observe);
            merge_pair(cl, cr, |sl, sr| {
                let mut selection = sl;
                selection.extend(sr);
                selection
            })
        }
        TNode::Like(lit) => Triplet {
            selection: vec![TExpr::Lit(lit.clone())],
            trie: input.trie,
            restrictions: input.restrictions,
        },
        TNode::Not(x) => {
            let cx = trans(schema, x, input, observe);
            let e = tnot(cx.single().clone());
            Triplet { selection: vec![e], trie: cx.trie, restrictions: cx.restrictions }
        }
        TNode::Gt(l, r) => binop(schema, l, r, input, observe, |a, b| TExpr::Gt(Box::new(a), Box::new(b))),
        TNode::Eq(l, r) => binop(schema, l, r, input, observe, |a, b| TExpr::Eq(Box::new(a), Box::new(b))),
        TNode::Sub(l, r) => binop(schema, l, r, input, observe, |a, b| TExpr::Sub(Box::new(a), Box::new(b))),
        TNode::Filtered(p) => {
            let snapshot = Triplet {
                selection: input.selection.clone(),
                trie: input.trie.clone(),
                restrictions: Vec::new(),
            };
            let cp = trans(schema, p, snapshot, observe);
            // Getters cannot touch the restriction component.
            debug_assert!(cp.restrictions.is_empty(), "filter predicates produce no restrictions");
            let pred = cp.single().clone();
            let mut restrictions = input.restrictions;
            if !restrictions.contains(&pred) {
                restrictions.push(pred);
            }
            Triplet { selection: input.selection, trie: cp.trie, restrictions }
        }
        TNode::NonEmpty(f) => {
            let snapshot = Triplet {
                selection: input.selection.clone(),
                trie: input.trie.clone(),
                restrictions: Vec::new(),
            };
            let inner = trans(schema, f, snapshot, observe);
            let inner = Triplet { selection: widen(schema, inner.selection), ..inner };
            Triplet {
                selection: vec![TExpr::Exists(inner)],
                trie: input.trie,
                restrictions: input.restrictions,
            }
        }
        TNode::ToAf(x) | TNode::ToFl(x) => trans(schema, x, input, observe),
    };
    observe(optic, &out);
    out
}

fn binop(
    schema: &Schema,
    l: &TOptic,
    r: &TOptic,
    input: Triplet,
    observe: Observer,
    build: impl FnOnce(TExpr, TExpr) -> TExpr,
) -> Triplet {
    let cl = trans(schema, l, input.clone(), observe);
    let cr = trans(schema, r, input, observe);
    merge_pair(cl, cr, |sl, sr| {
        let (a, b) = (sl.into_iter().next().unwrap(), sr.into_iter().next().unwrap());
        vec![build(a, b)]
    })
}

/// Merge two sibling translations of the same input: combine selections,
/// union tries (left order wins) and restrictions.
fn merge_pair(
    cl: Triplet,
    cr: Triplet,
    selection: impl FnOnce(Vec<TExpr>, Vec<TExpr>) -> Vec<TExpr>,
) -> Triplet {
    let mut trie = cl.trie;
    trie.merge(&cr.trie);
    let mut restrictions = cl.restrictions;
    for e in cr.restrictions {
        if !restrictions.contains(&e) {
            restrictions.push(e);
        }
    }
    Triplet { selection: selection(cl.selection, cr.selection), trie, restrictions }
}

/// Inside an existence check the selected column is irrelevant; widen a lone
/// getter or affine projection back to its row so the subquery selects
/// `alias.*`. Fold projections are kept — they have no relational form and
/// must stay visible to the generator's preconditions.
fn widen(schema: &Schema, selection: Vec<TExpr>) -> Vec<TExpr> {
    match selection.as_slice() {
        [TExpr::Proj(path, name)] => {
            let prim = schema.prim(name).expect("elaborated prims exist");
            if prim.kind == crate::model::OpticKind::Fold {
                selection
            } else {
                vec![TExpr::Path(path.clone())]
            }
        }
        _ => selection,
    }
}
