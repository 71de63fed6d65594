//! Typed, read-only optic queries over nested data, with four
//! interpretations: direct evaluation, XQuery emission, SQL emission (with a
//! small executor over shredded tables), and comprehension trees with a
//! normalizer.

pub mod ast;
pub mod compr;
pub mod eval;
pub mod model;
pub mod parser;
pub mod sql;
pub mod xml;
pub mod xquery;

/// String literal quoting style for emitted query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quote {
    #[default]
    Double,
    Single,
}

impl Quote {
    /// Quote `text`, doubling any embedded quote character.
    pub fn wrap(self, text: &str) -> String {
        match self {
            Quote::Double => format!("\"{}\"", text.replace('"', "\"\"")),
            Quote::Single => format!("'{}'", text.replace('\'', "''")),
        }
    }
}
