//! SQL interpretation: optics are first normalized into triplets (selection,
//! entity trie, restrictions), then refined with table aliases and generated
//! into a small SQL AST, which can be printed or executed against shredded
//! tables.

pub mod exec;
pub mod gen;
pub mod matcher;
pub mod print;
pub mod triplet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SqlError {
    #[error("result type `{0}` is not flat")]
    NotFlatPart(String),
    #[error("fold `{0}` selects a base type and has no relational form")]
    FoldOverBase(String),
    #[error("query does not iterate the root fold")]
    NoRootFold,
    #[error("no pk entry for entity `{0}`")]
    MissingPk(String),
    #[error("cannot refine an empty trie")]
    EmptyTrie,
    #[error("no table named `{0}`")]
    UnknownTable(String),
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("unknown column `{alias}.{column}`")]
    UnknownColumn { alias: String, column: String },
    #[error("type mismatch in comparison: {0}")]
    TypeMismatch(String),
}
