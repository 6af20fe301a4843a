use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;

use super::types::{format_timestamp, ScalarType};
use super::ModelError;

/// Field-ordered document. Insertion order is preserved so that anything
/// rendered from a document (native fragments, explain output) is stable.
pub type Document = IndexMap<String, Value>;

/// Extended relational value: SQL scalars plus nested arrays and documents.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    /// Microseconds since the Unix epoch, UTC.
    Timestamp(i64),
    Array(Vec<Value>),
    Document(Document),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_document(&self) -> Option<&Document> {
        match self {
            Value::Document(d) => Some(d),
            _ => None,
        }
    }

    /// Name of the variant, used in error messages.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Text(_) => "text",
            Value::Timestamp(_) => "timestamp",
            Value::Array(_) => "array",
            Value::Document(_) => "document",
        }
    }

    /// Scalar type naturally carried by this value, if it is a non-null scalar.
    pub fn natural_type(&self) -> Option<ScalarType> {
        Some(match self {
            Value::Bool(_) => ScalarType::Bool,
            Value::Int(_) => ScalarType::BigInt,
            Value::Float(_) => ScalarType::Double,
            Value::Text(_) => ScalarType::Text,
            Value::Timestamp(_) => ScalarType::Timestamp,
            _ => return None,
        })
    }

    /// Renders the value for display: text unquoted, everything else as in
    /// [`fmt::Display`].
    pub fn to_plain_string(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }
}

/// Three-valued comparison. `None` means "unknown": either side is Null, or
/// the values are not comparable.
pub fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    use Value::*;
    match (a, b) {
        (Null, _) | (_, Null) => None,
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Float(x), Float(y)) => Some(x.total_cmp(y)),
        (Int(x), Float(y)) => Some((*x as f64).total_cmp(y)),
        (Float(x), Int(y)) => Some(x.total_cmp(&(*y as f64))),
        (Text(x), Text(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Timestamp(x), Timestamp(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn type_rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Int(_) | Value::Float(_) => 2,
        Value::Text(_) => 3,
        Value::Timestamp(_) => 4,
        Value::Array(_) => 5,
        Value::Document(_) => 6,
    }
}

/// Total order used for sorting. Null sorts before everything else; values
/// of different kinds are ordered by kind.
pub fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    if let Some(o) = compare(a, b) {
        return o;
    }
    match (a, b) {
        (Value::Array(x), Value::Array(y)) => {
            for (l, r) in x.iter().zip(y) {
                let o = sort_cmp(l, r);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        (Value::Document(x), Value::Document(y)) => {
            for ((lk, lv), (rk, rv)) in x.iter().zip(y) {
                let o = lk.cmp(rk).then_with(|| sort_cmp(lv, rv));
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        _ => type_rank(a).cmp(&type_rank(b)),
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Null, Null) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a == b || (a.is_nan() && b.is_nan()),
            (Text(a), Text(b)) => a == b,
            (Timestamp(a), Timestamp(b)) => a == b,
            (Array(a), Array(b)) => a == b,
            (Document(a), Document(b)) => a.len() == b.len() && a.iter().zip(b).all(|(l, r)| l == r),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Float(f) => {
                let bits = if *f == 0.0 {
                    0u64
                } else if f.is_nan() {
                    u64::MAX
                } else {
                    f.to_bits()
                };
                bits.hash(state)
            }
            Value::Text(s) => s.hash(state),
            Value::Timestamp(t) => t.hash(state),
            Value::Array(a) => a.hash(state),
            Value::Document(d) => {
                d.len().hash(state);
                for (k, v) in d {
                    k.hash(state);
                    v.hash(state);
                }
            }
        }
    }
}

/// Canonical decimal rendering of a float: shortest text that parses back to
/// the same value, without a trailing `.0`.
pub fn format_float(f: f64) -> String {
    if f.is_nan() {
        "NaN".into()
    } else if f.is_infinite() {
        if f > 0.0 { "Infinity" } else { "-Infinity" }.into()
    } else {
        format!("{f}")
    }
}

/// SQL literal form of a float: always carries a decimal point or exponent so
/// that it reads back as a float.
pub(crate) fn float_literal(f: f64) -> String {
    format!("{f:?}")
}

pub(crate) fn quote_text(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for Value {
    /// Canonical rendering: scalars as SQL literals, arrays as `[v1, v2]`,
    /// documents as `{k: v}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&float_literal(*x)),
            Value::Text(s) => f.write_str(&quote_text(s)),
            Value::Timestamp(t) => write!(f, "TIMESTAMP '{}'", format_timestamp(*t)),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Document(d) => {
                f.write_str("{")?;
                for (i, (k, v)) in d.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

fn split_path(path: &str) -> Result<Vec<&str>, ModelError> {
    let segs: Vec<&str> = path.split('.').collect();
    if path.is_empty() || segs.iter().any(|s| s.is_empty()) {
        return Err(ModelError::Path(path.to_string()));
    }
    Ok(segs)
}

/// Looks up a dot-separated path in a document. Absent segments yield Null,
/// and so does an array met at an intermediate segment.
pub fn get_path(doc: &Value, path: &str) -> Result<Value, ModelError> {
    let segs = split_path(path)?;
    Ok(lookup(doc, &segs).cloned().unwrap_or(Value::Null))
}

pub(crate) fn lookup<'a>(doc: &'a Value, segs: &[&str]) -> Option<&'a Value> {
    let mut cur = doc;
    for seg in segs {
        match cur {
            Value::Document(d) => cur = d.get(*seg)?,
            _ => return None,
        }
    }
    Some(cur)
}

/// Borrowing variant of [`get_path`] for already-validated paths.
pub fn path_ref<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    let segs: Vec<&str> = path.split('.').collect();
    lookup(doc, &segs)
}

/// Sets `path` inside `doc`, creating intermediate documents as needed.
/// Non-document intermediates are replaced.
pub fn set_path(doc: &mut Document, path: &str, value: Value) {
    let mut segs = path.split('.').peekable();
    let mut cur = doc;
    while let Some(seg) = segs.next() {
        if segs.peek().is_none() {
            cur.insert(seg.to_string(), value);
            return;
        }
        let entry = cur
            .entry(seg.to_string())
            .or_insert_with(|| Value::Document(Document::new()));
        if !matches!(entry, Value::Document(_)) {
            *entry = Value::Document(Document::new());
        }
        cur = match entry {
            Value::Document(d) => d,
            _ => unreachable!(),
        };
    }
}

pub fn check_path(path: &str) -> Result<(), ModelError> {
    split_path(path).map(|_| ())
}
