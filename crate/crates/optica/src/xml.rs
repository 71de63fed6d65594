//! Minimal XML reader for the data-document convention.
//!
//! The convention only uses elements and character data: one element per
//! optic, repeated elements for folds, no attributes. This reader supports
//! exactly that subset (plus comments, a leading declaration, and the five
//! predefined entities) and rejects everything else.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum XmlError {
    #[error("xml: unexpected end of input")]
    UnexpectedEof,
    #[error("xml: attributes are not supported (element `{0}`)")]
    Attribute(String),
    #[error("xml: mixed text and child elements under `{0}`")]
    MixedContent(String),
    #[error("xml: mismatched closing tag `{found}` (expected `{expected}`)")]
    Mismatch { expected: String, found: String },
    #[error("xml: unknown entity `&{0};`")]
    UnknownEntity(String),
    #[error("xml: malformed markup at byte {0}")]
    Malformed(usize),
    #[error("xml: trailing content after the root element")]
    Trailing,
}

/// A parsed element: either a leaf with character data or a parent with
/// child elements. Whitespace between child elements is dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub children: Vec<Element>,
    pub text: String,
}

pub fn parse(input: &str) -> Result<Element, XmlError> {
    let mut p = Parser { s: input.as_bytes(), pos: 0 };
    p.skip_misc()?;
    let root = p.element()?;
    p.skip_misc()?;
    if p.pos < p.s.len() {
        return Err(XmlError::Trailing);
    }
    Ok(root)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn starts_with(&self, pat: &str) -> bool {
        self.s[self.pos..].starts_with(pat.as_bytes())
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    /// Skip whitespace, comments and processing instructions/declarations.
    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.starts_with("<!--") {
                match self.find("-->") {
                    Some(end) => self.pos = end + 3,
                    None => return Err(XmlError::UnexpectedEof),
                }
            } else if self.starts_with("<?") {
                match self.find("?>") {
                    Some(end) => self.pos = end + 2,
                    None => return Err(XmlError::UnexpectedEof),
                }
            } else {
                return Ok(());
            }
        }
    }

    fn find(&self, pat: &str) -> Option<usize> {
        self.s[self.pos..]
            .windows(pat.len())
            .position(|w| w == pat.as_bytes())
            .map(|i| self.pos + i)
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' || c == b'.' || c == b':' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(XmlError::Malformed(start));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn element(&mut self) -> Result<Element, XmlError> {
        if self.peek() != Some(b'<') {
            return Err(XmlError::Malformed(self.pos));
        }
        self.pos += 1;
        let name = self.name()?;
        self.skip_ws();
        match self.peek() {
            Some(b'>') => self.pos += 1,
            Some(b'/') if self.s.get(self.pos + 1) == Some(&b'>') => {
                self.pos += 2;
                return Ok(Element { name, children: Vec::new(), text: String::new() });
            }
            Some(_) => return Err(XmlError::Attribute(name)),
            None => return Err(XmlError::UnexpectedEof),
        }
        let mut children = Vec::new();
        let mut text = String::new();
        loop {
            if self.starts_with("</") {
                self.pos += 2;
                let close = self.name()?;
                if close != name {
                    return Err(XmlError::Mismatch { expected: name, found: close });
                }
                self.skip_ws();
                if self.peek() != Some(b'>') {
                    return Err(XmlError::Malformed(self.pos));
                }
                self.pos += 1;
                if !children.is_empty() && !text.trim().is_empty() {
                    return Err(XmlError::MixedContent(name));
                }
                if !children.is_empty() {
                    text.clear();
                }
                return Ok(Element { name, children, text });
            } else if self.starts_with("<!--") {
                self.skip_misc()?;
            } else if self.peek() == Some(b'<') {
                children.push(self.element()?);
            } else if self.peek().is_none() {
                return Err(XmlError::UnexpectedEof);
            } else {
                text.push_str(&self.char_data()?);
            }
        }
    }

    /// Character data up to the next `<`, with entity references decoded.
    fn char_data(&mut self) -> Result<String, XmlError> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            match c {
                b'<' => break,
                b'&' => {
                    self.pos += 1;
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c != b';') {
                        self.pos += 1;
                    }
                    if self.peek().is_none() {
                        return Err(XmlError::UnexpectedEof);
                    }
                    let entity = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
                    self.pos += 1;
                    out.push(match entity.as_str() {
                        "amp" => '&',
                        "lt" => '<',
                        "gt" => '>',
                        "quot" => '"',
                        "apos" => '\'',
                        _ => return Err(XmlError::UnknownEntity(entity)),
                    });
                }
                _ => {
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c != b'<' && c != b'&') {
                        self.pos += 1;
                    }
                    out.push_str(&String::from_utf8_lossy(&self.s[start..self.pos]));
                }
            }
        }
        Ok(out)
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}
