//! Extended relational model shared by every other module: values with
//! nested arrays and documents, column types, schemas and rows.

mod types;
mod value;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use types::{coerce, coerce_exact, format_timestamp, parse_timestamp, ScalarType};
pub use value::{
    check_path, compare, format_float, get_path, path_ref, set_path, sort_cmp, Document, Value,
};
pub(crate) use types::parse_int_text;
pub(crate) use value::quote_text;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed path {0:?}")]
    Path(String),
    #[error("cannot convert {value} to {target}")]
    Coerce { value: String, target: ScalarType },
    #[error("invalid schema: {0}")]
    Schema(String),
}

/// Ordered option list attached to tables and columns (`OPTIONS (k 'v', ...)`).
pub type Options = IndexMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub options: Options,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, ty: ScalarType) -> Self {
        ColumnDef {
            name: name.into(),
            ty,
            options: Options::new(),
        }
    }

    pub fn with_option(mut self, key: &str, value: impl Into<String>) -> Self {
        self.options.insert(key.to_string(), value.into());
        self
    }

    /// Source path of the column in the backing store: the `mname` option,
    /// or the column name itself.
    pub fn source_path(&self) -> &str {
        self.options.get("mname").map(String::as_str).unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnDef>", into = "Vec<ColumnDef>")]
pub struct RelSchema {
    columns: Vec<ColumnDef>,
}

impl RelSchema {
    pub fn new(columns: Vec<ColumnDef>) -> Result<Self, ModelError> {
        if columns.is_empty() {
            return Err(ModelError::Schema("a relation needs at least one column".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(ModelError::Schema(format!("duplicate column {:?}", c.name)));
            }
            if let Some(m) = c.options.get("mname") {
                check_path(m)?;
            }
        }
        Ok(RelSchema { columns })
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }
}

impl TryFrom<Vec<ColumnDef>> for RelSchema {
    type Error = ModelError;
    fn try_from(columns: Vec<ColumnDef>) -> Result<Self, ModelError> {
        RelSchema::new(columns)
    }
}

impl From<RelSchema> for Vec<ColumnDef> {
    fn from(s: RelSchema) -> Self {
        s.columns
    }
}

/// A tuple positionally aligned with some schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Row(#[serde(with = "json_values")] pub Vec<Value>);

impl std::ops::Index<usize> for Row {
    type Output = Value;

    fn index(&self, i: usize) -> &Value {
        &self.0[i]
    }
}

impl Row {
    pub fn new(values: Vec<Value>) -> Self {
        Row(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn into_values(self) -> Vec<Value> {
        self.0
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks arity and that every value is Null or already of the column's
    /// carrier type.
    pub fn conforms_to(&self, schema: &RelSchema) -> bool {
        self.0.len() == schema.len()
            && self.0.iter().zip(schema.columns()).all(|(v, c)| {
                v.is_null() || matches!(coerce(v, c.ty), Ok(ref w) if w == v)
            })
    }
}

impl From<Vec<Value>> for Row {
    fn from(v: Vec<Value>) -> Self {
        Row(v)
    }
}

/// Converts parsed JSON into a [`Value`]. Integers that fit in i64 become
/// `Int`, other numbers `Float`; `{"$date": "..."}` becomes a timestamp.
pub fn from_json(j: &serde_json::Value) -> Value {
    use serde_json::Value as J;
    match j {
        J::Null => Value::Null,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        J::String(s) => Value::Text(s.clone()),
        J::Array(a) => Value::Array(a.iter().map(from_json).collect()),
        J::Object(o) => {
            if o.len() == 1 {
                if let Some(J::String(s)) = o.get("$date") {
                    if let Some(ts) = parse_timestamp(s) {
                        return Value::Timestamp(ts);
                    }
                }
            }
            Value::Document(o.iter().map(|(k, v)| (k.clone(), from_json(v))).collect())
        }
    }
}

pub fn to_json(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Null => J::Null,
        Value::Bool(b) => J::Bool(*b),
        Value::Int(i) => J::from(*i),
        Value::Float(f) => serde_json::Number::from_f64(*f).map(J::Number).unwrap_or(J::Null),
        Value::Text(s) => J::String(s.clone()),
        Value::Timestamp(t) => {
            let mut m = serde_json::Map::new();
            m.insert("$date".into(), J::String(format_timestamp(*t)));
            J::Object(m)
        }
        Value::Array(a) => J::Array(a.iter().map(to_json).collect()),
        Value::Document(d) => J::Object(d.iter().map(|(k, v)| (k.clone(), to_json(v))).collect()),
    }
}

mod json_values {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{from_json, to_json, Value};

    pub fn serialize<S: Serializer>(vals: &[Value], s: S) -> Result<S::Ok, S::Error> {
        vals.iter().map(to_json).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Value>, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        Ok(raw.iter().map(from_json).collect())
    }
}
