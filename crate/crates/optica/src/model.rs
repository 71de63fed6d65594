//! Data model: types, schemas, nested values, and relational shredding.
//!
//! A schema declares entities and primitive optics over them. Nested values
//! follow the schema shape; `shred` flattens a nested value into relational
//! tables using foreign-key aggregation (getter-to-entity fields hold the
//! target's primary key) and association (fold children carry the parent's
//! primary key as an extra column).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::xml::{self, Element, XmlError};

/// Types of wholes and parts: three base types, pairs, and named entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelType {
    Int,
    Bool,
    Str,
    Pair(Box<ModelType>, Box<ModelType>),
    Entity(String),
}

impl ModelType {
    pub fn is_base(&self) -> bool {
        matches!(self, ModelType::Int | ModelType::Bool | ModelType::Str)
    }

    pub fn entity_name(&self) -> Option<&str> {
        match self {
            ModelType::Entity(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelType::Int => write!(f, "Int"),
            ModelType::Bool => write!(f, "Bool"),
            ModelType::Str => write!(f, "String"),
            ModelType::Pair(l, r) => write!(f, "({l}, {r})"),
            ModelType::Entity(name) => write!(f, "{name}"),
        }
    }
}

/// Optic kinds, ordered by generality: every getter is an affine fold and
/// every affine fold is a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpticKind {
    Getter,
    Affine,
    Fold,
}

impl fmt::Display for OpticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpticKind::Getter => write!(f, "getter"),
            OpticKind::Affine => write!(f, "affine"),
            OpticKind::Fold => write!(f, "fold"),
        }
    }
}

/// Base-typed constant literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lit {
    Int(i64),
    Bool(bool),
    Str(String),
}

impl Lit {
    pub fn base_type(&self) -> ModelType {
        match self {
            Lit::Int(_) => ModelType::Int,
            Lit::Bool(_) => ModelType::Bool,
            Lit::Str(_) => ModelType::Str,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Lit::Int(n) => Value::I(*n),
            Lit::Bool(b) => Value::B(*b),
            Lit::Str(s) => Value::S(s.clone()),
        }
    }
}

/// A primitive optic declared by the schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prim {
    pub name: String,
    pub kind: OpticKind,
    /// Entity name (possibly the root entity).
    pub whole: String,
    pub part: ModelType,
    /// XML element name for this optic's data.
    pub element: String,
}

/// Primary-key column per entity.
pub type PkMap = BTreeMap<String, String>;

#[derive(Debug, Clone)]
pub struct Schema {
    root: String,
    entities: Vec<String>,
    prims: Vec<Prim>,
    pk: PkMap,
}

impl Schema {
    pub fn root_name(&self) -> &str {
        &self.root
    }

    pub fn root_type(&self) -> ModelType {
        ModelType::Entity(self.root.clone())
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn prims(&self) -> &[Prim] {
        &self.prims
    }

    pub fn prim(&self, name: &str) -> Option<&Prim> {
        self.prims.iter().find(|p| p.name == name)
    }

    /// Prims whose whole is `entity`, in declaration order (the field order).
    pub fn prims_of<'a>(&'a self, entity: &'a str) -> impl Iterator<Item = &'a Prim> {
        self.prims.iter().filter(move |p| p.whole == entity)
    }

    /// The unique entry-point fold rooted at the schema root.
    pub fn root_prim(&self) -> &Prim {
        self.prims
            .iter()
            .find(|p| p.whole == self.root)
            .expect("validated: root has exactly one prim")
    }

    pub fn pk_map(&self) -> &PkMap {
        &self.pk
    }

    /// True when some fold prim produces this entity (association child).
    pub fn is_fold_child(&self, entity: &str) -> bool {
        self.prims
            .iter()
            .any(|p| p.kind == OpticKind::Fold && p.part.entity_name() == Some(entity))
    }

    /// The fold prim producing this entity, if any.
    pub fn fold_parent(&self, entity: &str) -> Option<&Prim> {
        self.prims
            .iter()
            .find(|p| p.kind == OpticKind::Fold && p.part.entity_name() == Some(entity))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("schema line {line}: {msg}")]
    SchemaSyntax { line: usize, msg: String },
    #[error("schema: duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("schema: duplicate prim `{0}`")]
    DuplicatePrim(String),
    #[error("schema: unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("schema: root `{0}` must be referenced by exactly one fold prim")]
    BadRoot(String),
    #[error("schema: entity `{0}` is not reachable from the root")]
    Disconnected(String),
    #[error("schema: entity reference cycle through `{0}`")]
    Cycle(String),
    #[error("schema: entity `{0}` is the target of more than one fold prim")]
    MultipleFoldParents(String),
    #[error("schema: pk column `{column}` is not a base getter of `{entity}`")]
    BadPk { entity: String, column: String },
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("json: {0}")]
    Json(String),
    #[error("data: unknown element `{element}` under `{context}`")]
    UnknownElement { context: String, element: String },
    #[error("data: `{element}` occurs {found} times under `{context}` (expected {expected})")]
    Arity { context: String, element: String, expected: &'static str, found: usize },
    #[error("data: type mismatch at `{context}`: {msg}")]
    TypeMismatch { context: String, msg: String },
    #[error("shred: no pk entry for entity `{0}`")]
    MissingPk(String),
    #[error("shred: pk collision in table `{entity}` on key {key}")]
    PkCollision { entity: String, key: String },
    #[error("shred: fold prim `{0}` selects a base type and has no relational form")]
    UnshreddableFold(String),
    #[error("shred: association column `{column}` clashes with a declared column of `{entity}`")]
    ColumnClash { entity: String, column: String },
}

/// Parse a schema file.
///
/// Line-oriented: `root <Entity>`, `entity <Name>`,
/// `optic <name> : <kind> <Whole> <Part> [as <element>]`, `pk <Entity> <column>`.
/// Blank lines and `#` comments are skipped. Fold prims default their XML
/// element name to the prim name minus one trailing `s`.
pub fn load_schema(text: &str) -> Result<Schema, ModelError> {
    let mut root: Option<String> = None;
    let mut entities: Vec<String> = Vec::new();
    let mut prims: Vec<Prim> = Vec::new();
    let mut pk: PkMap = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let syntax = |msg: &str| ModelError::SchemaSyntax { line, msg: msg.to_string() };
        match words[0] {
            "root" => {
                if words.len() != 2 {
                    return Err(syntax("expected `root <Entity>`"));
                }
                if root.is_some() {
                    return Err(syntax("duplicate root declaration"));
                }
                root = Some(words[1].to_string());
            }
            "entity" => {
                if words.len() != 2 {
                    return Err(syntax("expected `entity <Name>`"));
                }
                let name = words[1].to_string();
                if entities.contains(&name) {
                    return Err(ModelError::DuplicateEntity(name));
                }
                entities.push(name);
            }
            "optic" => {
                // optic <name> : <kind> <Whole> <Part> [as <element>]
                let ok = (words.len() == 6 || words.len() == 8) && words[2] == ":";
                if !ok || (words.len() == 8 && words[6] != "as") {
                    return Err(syntax("expected `optic <name> : <kind> <Whole> <Part> [as <element>]`"));
                }
                let name = words[1].to_string();
                let kind = match words[3] {
                    "getter" => OpticKind::Getter,
                    "affine" => OpticKind::Affine,
                    "fold" => OpticKind::Fold,
                    other => return Err(syntax(&format!("unknown kind `{other}`"))),
                };
                let whole = words[4].to_string();
                let part = match words[5] {
                    "Int" => ModelType::Int,
                    "Bool" => ModelType::Bool,
                    "String" => ModelType::Str,
                    entity => ModelType::Entity(entity.to_string()),
                };
                let element = if words.len() == 8 {
                    words[7].to_string()
                } else if kind == OpticKind::Fold {
                    name.strip_suffix('s').unwrap_or(&name).to_string()
                } else {
                    name.clone()
                };
                if crate::parser::RESERVED.contains(&name.as_str()) {
                    return Err(syntax(&format!("`{name}` is a reserved word")));
                }
                if prims.iter().any(|p| p.name == name) {
                    return Err(ModelError::DuplicatePrim(name));
                }
                prims.push(Prim { name, kind, whole, part, element });
            }
            "pk" => {
                if words.len() != 3 {
                    return Err(syntax("expected `pk <Entity> <column>`"));
                }
                pk.insert(words[1].to_string(), words[2].to_string());
            }
            other => return Err(syntax(&format!("unknown directive `{other}`"))),
        }
    }

    let root = root.ok_or(ModelError::SchemaSyntax { line: 0, msg: "missing `root` declaration".into() })?;
    let schema = Schema { root, entities, prims, pk };
    validate(&schema)?;
    Ok(schema)
}

fn validate(schema: &Schema) -> Result<(), ModelError> {
    let declared: BTreeSet<&str> = schema.entities.iter().map(|s| s.as_str()).collect();
    if !declared.contains(schema.root.as_str()) {
        return Err(ModelError::UnknownEntity(schema.root.clone()));
    }
    for prim in &schema.prims {
        if !declared.contains(prim.whole.as_str()) {
            return Err(ModelError::UnknownEntity(prim.whole.clone()));
        }
        if let Some(part) = prim.part.entity_name() {
            if !declared.contains(part) {
                return Err(ModelError::UnknownEntity(part.to_string()));
            }
        }
    }

    // The root is entered through exactly one fold prim and appears nowhere
    // else; its value is the bare list of that fold's children.
    let root_prims: Vec<&Prim> = schema.prims.iter().filter(|p| p.whole == schema.root).collect();
    let root_ok = root_prims.len() == 1
        && root_prims[0].kind == OpticKind::Fold
        && root_prims[0].part.entity_name().is_some()
        && schema.prims.iter().all(|p| p.part.entity_name() != Some(schema.root.as_str()));
    if !root_ok {
        return Err(ModelError::BadRoot(schema.root.clone()));
    }

    // Each entity has at most one fold parent (a row can carry one
    // association column).
    for entity in &schema.entities {
        let fold_parents = schema
            .prims
            .iter()
            .filter(|p| p.kind == OpticKind::Fold && p.part.entity_name() == Some(entity.as_str()))
            .count();
        if fold_parents > 1 {
            return Err(ModelError::MultipleFoldParents(entity.clone()));
        }
    }

    // Reachability and acyclicity over entity reference edges.
    let mut state: BTreeMap<&str, u8> = BTreeMap::new(); // 1 = visiting, 2 = done
    fn dfs<'a>(schema: &'a Schema, entity: &'a str, state: &mut BTreeMap<&'a str, u8>) -> Result<(), ModelError> {
        match state.get(entity) {
            Some(1) => return Err(ModelError::Cycle(entity.to_string())),
            Some(2) => return Ok(()),
            _ => {}
        }
        state.insert(entity, 1);
        for prim in schema.prims_of(entity) {
            if let Some(part) = prim.part.entity_name() {
                dfs(schema, part, state)?;
            }
        }
        state.insert(entity, 2);
        Ok(())
    }
    dfs(schema, &schema.root, &mut state)?;
    for entity in &schema.entities {
        if !state.contains_key(entity.as_str()) {
            return Err(ModelError::Disconnected(entity.clone()));
        }
    }

    // pk columns must name a base getter of the entity.
    for (entity, column) in &schema.pk {
        if !declared.contains(entity.as_str()) {
            return Err(ModelError::UnknownEntity(entity.clone()));
        }
        let ok = schema
            .prims_of(entity)
            .any(|p| p.name == *column && p.kind == OpticKind::Getter && p.part.is_base());
        if !ok {
            return Err(ModelError::BadPk { entity: entity.clone(), column: column.clone() });
        }
    }
    Ok(())
}

/// A nested value. Entity records hold their fields in schema field order;
/// affine and fold fields are stored as `L` (length at most 1 for affine).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    I(i64),
    B(bool),
    S(String),
    P(Box<Value>, Box<Value>),
    L(Vec<Value>),
    R(String, Vec<(String, Value)>),
}

impl Value {
    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::R(_, fields) => fields.iter().find(|(f, _)| f == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I(n) => write!(f, "{n}"),
            Value::B(b) => write!(f, "{b}"),
            Value::S(s) => write!(f, "{s}"),
            Value::P(l, r) => write!(f, "({l},{r})"),
            Value::L(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Value::R(_, fields) => {
                write!(f, "{{")?;
                for (i, (name, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{name}={value}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Load a data document in the XML convention as a value of the root type.
pub fn load_value_xml(text: &str, schema: &Schema) -> Result<Value, ModelError> {
    let doc = xml::parse(text)?;
    if doc.name != "xml" {
        return Err(ModelError::UnknownElement { context: "document".into(), element: doc.name });
    }
    let root_prim = schema.root_prim();
    for child in &doc.children {
        if child.name != root_prim.element {
            return Err(ModelError::UnknownElement { context: "xml".into(), element: child.name.clone() });
        }
    }
    let entity = root_prim.part.entity_name().expect("validated: root fold targets an entity");
    let items = doc
        .children
        .iter()
        .map(|el| entity_from_xml(el, entity, schema))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Value::L(items))
}

fn entity_from_xml(el: &Element, entity: &str, schema: &Schema) -> Result<Value, ModelError> {
    for child in &el.children {
        if !schema.prims_of(entity).any(|p| p.element == child.name) {
            return Err(ModelError::UnknownElement { context: entity.into(), element: child.name.clone() });
        }
    }
    let mut fields = Vec::new();
    for prim in schema.prims_of(entity) {
        let matches: Vec<&Element> = el.children.iter().filter(|c| c.name == prim.element).collect();
        let value = match prim.kind {
            OpticKind::Getter => {
                if matches.len() != 1 {
                    return Err(ModelError::Arity {
                        context: entity.into(),
                        element: prim.element.clone(),
                        expected: "exactly 1",
                        found: matches.len(),
                    });
                }
                part_from_xml(matches[0], &prim.part, schema)?
            }
            OpticKind::Affine => {
                if matches.len() > 1 {
                    return Err(ModelError::Arity {
                        context: entity.into(),
                        element: prim.element.clone(),
                        expected: "at most 1",
                        found: matches.len(),
                    });
                }
                Value::L(matches.iter().map(|m| part_from_xml(m, &prim.part, schema)).collect::<Result<_, _>>()?)
            }
            OpticKind::Fold => {
                Value::L(matches.iter().map(|m| part_from_xml(m, &prim.part, schema)).collect::<Result<_, _>>()?)
            }
        };
        fields.push((prim.name.clone(), value));
    }
    Ok(Value::R(entity.to_string(), fields))
}

fn part_from_xml(el: &Element, part: &ModelType, schema: &Schema) -> Result<Value, ModelError> {
    let mismatch = |msg: String| ModelError::TypeMismatch { context: el.name.clone(), msg };
    match part {
        ModelType::Int => {
            if !el.children.is_empty() {
                return Err(mismatch("expected an integer, found child elements".into()));
            }
            el.text.trim().parse::<i64>().map(Value::I).map_err(|_| mismatch(format!("`{}` is not an integer", el.text)))
        }
        ModelType::Bool => {
            if !el.children.is_empty() {
                return Err(mismatch("expected a boolean, found child elements".into()));
            }
            match el.text.trim() {
                "true" => Ok(Value::B(true)),
                "false" => Ok(Value::B(false)),
                other => Err(mismatch(format!("`{other}` is not a boolean"))),
            }
        }
        ModelType::Str => {
            if !el.children.is_empty() {
                return Err(mismatch("expected text, found child elements".into()));
            }
            Ok(Value::S(el.text.clone()))
        }
        ModelType::Entity(entity) => entity_from_xml(el, entity, schema),
        ModelType::Pair(_, _) => Err(mismatch("pair types do not occur in data documents".into())),
    }
}

/// Print a value of the root type back into the XML convention.
pub fn print_xml(value: &Value, schema: &Schema) -> String {
    let mut out = String::from("<xml>\n");
    let root_prim = schema.root_prim();
    if let Value::L(items) = value {
        for item in items {
            entity_to_xml(item, &root_prim.element, schema, 1, &mut out);
        }
    }
    out.push_str("</xml>\n");
    out
}

fn entity_to_xml(value: &Value, element: &str, schema: &Schema, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match value {
        Value::R(_, fields) => {
            out.push_str(&format!("{pad}<{element}>\n"));
            for (name, field) in fields {
                let prim = schema.prim(name).expect("value fields match schema prims");
                match field {
                    Value::L(items) => {
                        for item in items {
                            entity_to_xml(item, &prim.element, schema, depth + 1, out);
                        }
                    }
                    single => entity_to_xml(single, &prim.element, schema, depth + 1, out),
                }
            }
            out.push_str(&format!("{pad}</{element}>\n"));
        }
        Value::I(n) => out.push_str(&format!("{pad}<{element}>{n}</{element}>\n")),
        Value::B(b) => out.push_str(&format!("{pad}<{element}>{b}</{element}>\n")),
        Value::S(s) => out.push_str(&format!("{pad}<{element}>{}</{element}>\n", xml::escape(s))),
        Value::P(_, _) | Value::L(_) => unreachable!("pairs and bare lists do not occur in data documents"),
    }
}

/// Load the JSON mirror: the document is an array of root-child objects,
/// entities are objects keyed by prim name, affine/fold fields are arrays.
pub fn load_value_json(text: &str, schema: &Schema) -> Result<Value, ModelError> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    let root_prim = schema.root_prim();
    let entity = root_prim.part.entity_name().expect("validated: root fold targets an entity");
    let items = doc
        .as_array()
        .ok_or_else(|| ModelError::Json("document root must be an array".into()))?;
    let values = items.iter().map(|item| entity_from_json(item, entity, schema)).collect::<Result<_, _>>()?;
    Ok(Value::L(values))
}

fn entity_from_json(v: &serde_json::Value, entity: &str, schema: &Schema) -> Result<Value, ModelError> {
    let obj = v.as_object().ok_or_else(|| ModelError::TypeMismatch {
        context: entity.into(),
        msg: "expected an object".into(),
    })?;
    for key in obj.keys() {
        if !schema.prims_of(entity).any(|p| p.name == *key) {
            return Err(ModelError::UnknownElement { context: entity.into(), element: key.clone() });
        }
    }
    let mut fields = Vec::new();
    for prim in schema.prims_of(entity) {
        let field = obj.get(&prim.name);
        let value = match prim.kind {
            OpticKind::Getter => {
                let field = field.ok_or_else(|| ModelError::Arity {
                    context: entity.into(),
                    element: prim.name.clone(),
                    expected: "exactly 1",
                    found: 0,
                })?;
                part_from_json(field, &prim.part, &prim.name, schema)?
            }
            OpticKind::Affine | OpticKind::Fold => {
                let items: Vec<&serde_json::Value> = match field {
                    None => Vec::new(),
                    Some(serde_json::Value::Array(items)) => items.iter().collect(),
                    Some(_) => {
                        return Err(ModelError::TypeMismatch {
                            context: prim.name.clone(),
                            msg: "expected an array".into(),
                        })
                    }
                };
                if prim.kind == OpticKind::Affine && items.len() > 1 {
                    return Err(ModelError::Arity {
                        context: entity.into(),
                        element: prim.name.clone(),
                        expected: "at most 1",
                        found: items.len(),
                    });
                }
                Value::L(
                    items
                        .into_iter()
                        .map(|item| part_from_json(item, &prim.part, &prim.name, schema))
                        .collect::<Result<_, _>>()?,
                )
            }
        };
        fields.push((prim.name.clone(), value));
    }
    Ok(Value::R(entity.to_string(), fields))
}

fn part_from_json(
    v: &serde_json::Value,
    part: &ModelType,
    context: &str,
    schema: &Schema,
) -> Result<Value, ModelError> {
    let mismatch = |msg: &str| ModelError::TypeMismatch { context: context.into(), msg: msg.into() };
    match part {
        ModelType::Int => v
            .as_i64()
            .map(Value::I)
            .ok_or_else(|| mismatch("expected an integer")),
        ModelType::Bool => v.as_bool().map(Value::B).ok_or_else(|| mismatch("expected a boolean")),
        ModelType::Str => v
            .as_str()
            .map(|s| Value::S(s.to_string()))
            .ok_or_else(|| mismatch("expected a string")),
        ModelType::Entity(entity) => entity_from_json(v, entity, schema),
        ModelType::Pair(_, _) => Err(mismatch("pair types do not occur in data documents")),
    }
}

/// A nullable relational cell.
pub type Cell = Option<Value>;

/// One table per non-root entity. `columns[..decl_cols]` are the declared
/// prim columns (what `alias.*` expands to); a trailing association column
/// holds the parent's primary key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelTable {
    pub name: String,
    pub columns: Vec<String>,
    pub decl_cols: usize,
    pub rows: Vec<Vec<Cell>>,
}

pub type Database = BTreeMap<String, RelTable>;

/// Columns an entity materializes, in field order: base getters/affines and
/// entity getters/affines (foreign keys). Fold prims contribute no column.
fn declared_columns(schema: &Schema, entity: &str) -> Result<Vec<String>, ModelError> {
    let mut cols = Vec::new();
    for prim in schema.prims_of(entity) {
        match prim.kind {
            OpticKind::Getter | OpticKind::Affine => cols.push(prim.name.clone()),
            OpticKind::Fold => {
                if prim.part.is_base() {
                    return Err(ModelError::UnshreddableFold(prim.name.clone()));
                }
            }
        }
    }
    Ok(cols)
}

/// Flatten a nested value of the root type into relational tables.
pub fn shred(value: &Value, schema: &Schema, pk: &PkMap) -> Result<Database, ModelError> {
    let mut builder = Shredder { schema, pk, tables: BTreeMap::new() };
    for entity in schema.entities() {
        if entity == schema.root_name() {
            continue;
        }
        let columns = declared_columns(schema, entity)?;
        let decl_cols = columns.len();
        let mut columns = columns;
        if let Some(parent) = schema.fold_parent(entity) {
            if parent.whole != schema.root_name() {
                let col = pk.get(&parent.whole).ok_or_else(|| ModelError::MissingPk(parent.whole.clone()))?;
                if columns.contains(col) {
                    return Err(ModelError::ColumnClash { entity: entity.clone(), column: col.clone() });
                }
                columns.push(col.clone());
            }
        }
        builder.tables.insert(
            entity.clone(),
            TableBuild {
                table: RelTable { name: entity.clone(), columns, decl_cols, rows: Vec::new() },
                seen: BTreeMap::new(),
            },
        );
    }

    let root_entity = schema.root_prim().part.entity_name().unwrap().to_string();
    if let Value::L(items) = value {
        for item in items {
            builder.visit(item, &root_entity, None)?;
        }
    }
    Ok(builder
        .tables
        .into_iter()
        .map(|(name, build)| (name, build.table))
        .collect())
}

struct TableBuild {
    table: RelTable,
    /// pk value -> row index, for collision checking.
    seen: BTreeMap<Value, usize>,
}

struct Shredder<'a> {
    schema: &'a Schema,
    pk: &'a PkMap,
    tables: BTreeMap<String, TableBuild>,
}

impl<'a> Shredder<'a> {
    fn visit(&mut self, value: &Value, entity: &str, parent_key: Option<Value>) -> Result<(), ModelError> {
        let fields = match value {
            Value::R(name, fields) if name == entity => fields,
            _ => {
                return Err(ModelError::TypeMismatch {
                    context: entity.into(),
                    msg: "expected an entity record".into(),
                })
            }
        };
        let mut row: Vec<Cell> = Vec::new();
        // (entity, value, parent key) of nested records to visit after this row.
        let mut children: Vec<(String, Value, Option<Value>)> = Vec::new();
        let own_key = self.pk.get(entity).and_then(|col| value.field(col)).cloned();

        for (name, field) in fields {
            let prim = self.schema.prim(name).expect("value fields match schema prims");
            match (&prim.part, prim.kind) {
                (part, OpticKind::Getter) if part.is_base() => row.push(Some(field.clone())),
                (part, OpticKind::Affine) if part.is_base() => match field {
                    Value::L(items) => row.push(items.first().cloned()),
                    _ => unreachable!("affine fields are stored as lists"),
                },
                (part, OpticKind::Fold) if part.is_base() => {
                    return Err(ModelError::UnshreddableFold(prim.name.clone()))
                }
                (ModelType::Entity(target), OpticKind::Getter) => {
                    row.push(Some(self.key_of(field, target)?));
                    children.push((target.clone(), field.clone(), None));
                }
                (ModelType::Entity(target), OpticKind::Affine) => match field {
                    Value::L(items) => {
                        match items.first() {
                            Some(item) => {
                                row.push(Some(self.key_of(item, target)?));
                                children.push((target.clone(), item.clone(), None));
                            }
                            None => row.push(None),
                        }
                    }
                    _ => unreachable!("affine fields are stored as lists"),
                },
                (ModelType::Entity(target), OpticKind::Fold) => match field {
                    Value::L(items) => {
                        let key = if prim.whole == self.schema.root_name() {
                            None
                        } else {
                            let key = own_key.clone().ok_or_else(|| ModelError::MissingPk(entity.into()))?;
                            Some(key)
                        };
                        for item in items {
                            children.push((target.clone(), item.clone(), key.clone()));
                        }
                    }
                    _ => unreachable!("fold fields are stored as lists"),
                },
                _ => unreachable!("schema-typed values"),
            }
        }
        if let Some(key) = parent_key {
            row.push(Some(key));
        }
        self.append(entity, row, own_key)?;
        for (target, child, key) in children {
            self.visit(&child, &target, key)?;
        }
        Ok(())
    }

    /// The pk value of a record, for building a foreign-key cell.
    fn key_of(&self, value: &Value, entity: &str) -> Result<Value, ModelError> {
        let col = self.pk.get(entity).ok_or_else(|| ModelError::MissingPk(entity.into()))?;
        Ok(value.field(col).expect("pk columns are getter fields").clone())
    }

    fn append(&mut self, entity: &str, row: Vec<Cell>, key: Option<Value>) -> Result<(), ModelError> {
        let fold_child = self.schema.is_fold_child(entity);
        let build = self.tables.get_mut(entity).expect("tables cover all non-root entities");
        if let Some(key) = key {
            if let Some(&existing) = build.seen.get(&key) {
                // Association children must stay one row per occurrence, so
                // any duplicate key is a collision. Pure aggregation targets
                // tolerate byte-identical shared references.
                if fold_child || build.table.rows[existing] != row {
                    return Err(ModelError::PkCollision { entity: entity.into(), key: format!("{key}") });
                }
                return Ok(());
            }
            build.seen.insert(key, build.table.rows.len());
        }
        build.table.rows.push(row);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUPLES_SCHEMA: &str = include_str!("../tests/data/couples.schema");
    const COUPLES_XML: &str = include_str!("../tests/data/couples.xml");
    const COUPLES_JSON: &str = include_str!("../tests/data/couples.json");
    const ORG_SCHEMA: &str = include_str!("../tests/data/org.schema");
    const ORG_XML: &str = include_str!("../tests/data/org.xml");
    const ORG_JSON: &str = include_str!("../tests/data/org.json");

    fn s(text: &str) -> Cell {
        Some(Value::S(text.into()))
    }

    fn rows(table: &RelTable) -> Vec<Vec<Cell>> {
        table.rows.clone()
    }

    #[test]
    fn schema_declarations_parse_and_validate() {
        let schema = load_schema(ORG_SCHEMA).unwrap();
        assert_eq!(schema.root_name(), "Org");
        let tasks = schema.prim("tasks").unwrap();
        assert_eq!(tasks.kind, OpticKind::Fold);
        assert_eq!(tasks.element, "task");
        assert_eq!(schema.pk_map().get("Employee").map(String::as_str), Some("emp"));
        assert_eq!(schema.root_prim().name, "departments");
    }

    #[test]
    fn schema_rejects_malformed_shapes() {
        let base = "root D\nentity D\nentity E\noptic items : fold D E\noptic x : getter E Int\n";
        assert!(load_schema(base).is_ok());
        let cycle = "root D\nentity D\nentity E\noptic items : fold D E\noptic x : getter E E\n";
        assert_eq!(load_schema(cycle).unwrap_err(), ModelError::Cycle("E".into()));
        let disconnected = format!("{base}entity F\n");
        assert_eq!(load_schema(&disconnected).unwrap_err(), ModelError::Disconnected("F".into()));
        let two_parents = "root D\nentity D\nentity G\nentity E\n\
                           optic items : fold D G\noptic y : getter G Int\n\
                           optic g : fold G E\noptic h : fold G E\noptic x : getter E Int\n";
        assert_eq!(load_schema(two_parents).unwrap_err(), ModelError::MultipleFoldParents("E".into()));
        let getter_root = "root D\nentity D\nentity E\noptic item : getter D E\noptic x : getter E Int\n";
        assert_eq!(load_schema(getter_root).unwrap_err(), ModelError::BadRoot("D".into()));
        let bad_pk = format!("{base}pk E y\n");
        assert_eq!(
            load_schema(&bad_pk).unwrap_err(),
            ModelError::BadPk { entity: "E".into(), column: "y".into() }
        );
        let reserved = "root D\nentity D\nentity E\noptic all : fold D E\n";
        assert!(matches!(load_schema(reserved).unwrap_err(), ModelError::SchemaSyntax { .. }));
    }

    #[test]
    fn xml_and_json_documents_load_to_the_same_value() {
        let couples = load_schema(COUPLES_SCHEMA).unwrap();
        assert_eq!(
            load_value_xml(COUPLES_XML, &couples).unwrap(),
            load_value_json(COUPLES_JSON, &couples).unwrap()
        );
        let org = load_schema(ORG_SCHEMA).unwrap();
        assert_eq!(load_value_xml(ORG_XML, &org).unwrap(), load_value_json(ORG_JSON, &org).unwrap());
    }

    #[test]
    fn printed_documents_reload_to_the_same_value() {
        let schema = load_schema(ORG_SCHEMA).unwrap();
        let value = load_value_xml(ORG_XML, &schema).unwrap();
        assert_eq!(load_value_xml(&print_xml(&value, &schema), &schema).unwrap(), value);
    }

    #[test]
    fn data_documents_respect_field_arities() {
        let schema = load_schema(COUPLES_SCHEMA).unwrap();
        let twice = "<xml><couple>\
                     <fst><name>A</name><age>1</age></fst>\
                     <fst><name>B</name><age>2</age></fst>\
                     <snd><name>C</name><age>3</age></snd>\
                     </couple></xml>";
        assert!(matches!(
            load_value_xml(twice, &schema).unwrap_err(),
            ModelError::Arity { expected: "exactly 1", found: 2, .. }
        ));
        let stray = "<xml><couple><mid><name>A</name></mid></couple></xml>";
        assert!(matches!(load_value_xml(stray, &schema).unwrap_err(), ModelError::UnknownElement { .. }));
    }

    #[test]
    fn couples_shred_yields_person_and_couple_tables() {
        let schema = load_schema(COUPLES_SCHEMA).unwrap();
        let value = load_value_xml(COUPLES_XML, &schema).unwrap();
        let db = shred(&value, &schema, schema.pk_map()).unwrap();
        assert_eq!(db.len(), 2);

        let person = &db["Person"];
        assert_eq!(person.columns, ["name", "age"]);
        assert_eq!(person.decl_cols, 2);
        assert_eq!(
            rows(person),
            vec![
                vec![s("Alex"), Some(Value::I(60))],
                vec![s("Bert"), Some(Value::I(55))],
                vec![s("Cora"), Some(Value::I(33))],
                vec![s("Demi"), Some(Value::I(31))],
                vec![s("Eric"), Some(Value::I(21))],
                vec![s("Fred"), Some(Value::I(60))],
            ]
        );

        let couple = &db["Couple"];
        assert_eq!(couple.columns, ["fst", "snd"]);
        assert_eq!(
            rows(couple),
            vec![
                vec![s("Alex"), s("Bert")],
                vec![s("Cora"), s("Demi")],
                vec![s("Eric"), s("Fred")],
            ]
        );
    }

    #[test]
    fn org_shred_yields_association_columns_in_document_order() {
        let schema = load_schema(ORG_SCHEMA).unwrap();
        let value = load_value_xml(ORG_XML, &schema).unwrap();
        let db = shred(&value, &schema, schema.pk_map()).unwrap();

        let department = &db["Department"];
        assert_eq!(department.columns, ["dpt"]);
        assert_eq!(rows(department), vec![vec![s("Product")], vec![s("Quality")], vec![s("Research")], vec![s("Sales")]]);

        let employee = &db["Employee"];
        assert_eq!(employee.columns, ["emp", "dpt"]);
        assert_eq!(employee.decl_cols, 1);
        assert_eq!(
            rows(employee),
            vec![
                vec![s("Alex"), s("Product")],
                vec![s("Bert"), s("Product")],
                vec![s("Cora"), s("Research")],
                vec![s("Demi"), s("Research")],
                vec![s("Eric"), s("Research")],
                vec![s("Fred"), s("Sales")],
            ]
        );

        let task = &db["Task"];
        assert_eq!(task.columns, ["tsk", "emp"]);
        assert_eq!(
            rows(task),
            vec![
                vec![s("build"), s("Alex")],
                vec![s("build"), s("Bert")],
                vec![s("abstract"), s("Cora")],
                vec![s("build"), s("Cora")],
                vec![s("design"), s("Cora")],
                vec![s("abstract"), s("Demi")],
                vec![s("design"), s("Demi")],
                vec![s("abstract"), s("Eric")],
                vec![s("call"), s("Eric")],
                vec![s("design"), s("Eric")],
                vec![s("call"), s("Fred")],
            ]
        );
    }

    #[test]
    fn shred_reports_missing_and_colliding_keys() {
        let no_pk = ORG_SCHEMA.replace("pk Employee emp\n", "");
        let schema = load_schema(&no_pk).unwrap();
        let value = load_value_xml(ORG_XML, &schema).unwrap();
        let err = shred(&value, &schema, schema.pk_map()).unwrap_err();
        assert_eq!(err, ModelError::MissingPk("Employee".into()));

        let schema = load_schema(ORG_SCHEMA).unwrap();
        let dup = "<xml>\
                   <department><dpt>A</dpt><employee><emp>X</emp></employee></department>\
                   <department><dpt>B</dpt><employee><emp>X</emp></employee></department>\
                   </xml>";
        let value = load_value_xml(dup, &schema).unwrap();
        let err = shred(&value, &schema, schema.pk_map()).unwrap_err();
        assert_eq!(err, ModelError::PkCollision { entity: "Employee".into(), key: "X".into() });
    }
}
