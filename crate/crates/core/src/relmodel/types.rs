use std::fmt;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::value::{format_float, Value};
use super::ModelError;

/// Column types of the relational surface. NUMERIC is carried as a 64-bit
/// float (values above 2^53 lose precision).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    Bool,
    SmallInt,
    Int,
    BigInt,
    Double,
    Numeric,
    Text,
    Timestamp,
}

impl ScalarType {
    pub const ALL: [ScalarType; 8] = [
        ScalarType::Bool,
        ScalarType::SmallInt,
        ScalarType::Int,
        ScalarType::BigInt,
        ScalarType::Double,
        ScalarType::Numeric,
        ScalarType::Text,
        ScalarType::Timestamp,
    ];

    pub fn sql_name(self) -> &'static str {
        match self {
            ScalarType::Bool => "BOOLEAN",
            ScalarType::SmallInt => "SMALLINT",
            ScalarType::Int => "INT",
            ScalarType::BigInt => "BIGINT",
            ScalarType::Double => "DOUBLE PRECISION",
            ScalarType::Numeric => "NUMERIC",
            ScalarType::Text => "TEXT",
            ScalarType::Timestamp => "TIMESTAMP",
        }
    }

    /// Maps a (lowercased) single-word type name. Multi-word names such as
    /// `double precision` are resolved by the parser.
    pub fn from_word(word: &str) -> Option<ScalarType> {
        Some(match word {
            "bool" | "boolean" => ScalarType::Bool,
            "smallint" | "int2" => ScalarType::SmallInt,
            "int" | "integer" | "int4" => ScalarType::Int,
            "bigint" | "int8" => ScalarType::BigInt,
            "double" | "float" | "float8" | "real" => ScalarType::Double,
            "numeric" | "decimal" => ScalarType::Numeric,
            "text" | "varchar" | "string" => ScalarType::Text,
            "timestamp" => ScalarType::Timestamp,
            _ => return None,
        })
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ScalarType::SmallInt | ScalarType::Int | ScalarType::BigInt)
    }

    pub fn is_float(self) -> bool {
        matches!(self, ScalarType::Double | ScalarType::Numeric)
    }

    pub fn is_numeric(self) -> bool {
        self.is_integer() || self.is_float()
    }

    /// True when a value of this type is carried by the same `Value` variant
    /// as a value of `other`.
    pub fn same_carrier(self, other: ScalarType) -> bool {
        (self.is_integer() && other.is_integer())
            || (self.is_float() && other.is_float())
            || self == other
    }

    fn int_range(self) -> (i64, i64) {
        match self {
            ScalarType::SmallInt => (i16::MIN as i64, i16::MAX as i64),
            ScalarType::Int => (i32::MIN as i64, i32::MAX as i64),
            _ => (i64::MIN, i64::MAX),
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sql_name())
    }
}

const TS_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";

/// Parses `YYYY-MM-DD HH:MM:SS[.ffffff]` as UTC microseconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let (_, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 6 || s.len() < 19 {
        return None;
    }
    let dt = NaiveDateTime::parse_from_str(s, TS_FORMAT).ok()?;
    Some(dt.and_utc().timestamp_micros())
}

pub fn format_timestamp(micros: i64) -> String {
    match DateTime::from_timestamp_micros(micros) {
        Some(dt) if micros.rem_euclid(1_000_000) == 0 => dt.format("%Y-%m-%d %H:%M:%S").to_string(),
        Some(dt) => dt.format("%Y-%m-%d %H:%M:%S%.6f").to_string(),
        None => format!("@{micros}"),
    }
}

pub(crate) fn parse_int_text(s: &str) -> Option<i64> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<i64>().ok()
}

/// Converts `v` to a value of type `t`. Null converts to Null; identical
/// types convert to themselves.
pub fn coerce(v: &Value, t: ScalarType) -> Result<Value, ModelError> {
    let fail = || ModelError::Coerce {
        value: v.to_string(),
        target: t,
    };
    let out = match (v, t) {
        (Value::Null, _) => Value::Null,
        (Value::Bool(b), ScalarType::Bool) => Value::Bool(*b),
        (Value::Text(s), ScalarType::Bool) => match s.to_ascii_lowercase().as_str() {
            "true" | "t" => Value::Bool(true),
            "false" | "f" => Value::Bool(false),
            _ => return Err(fail()),
        },
        (_, t) if t.is_integer() => {
            let i = match v {
                Value::Int(i) => *i,
                Value::Float(f) if f.fract() == 0.0 && f.abs() < 9.3e18 => *f as i64,
                Value::Text(s) => parse_int_text(s).ok_or_else(fail)?,
                _ => return Err(fail()),
            };
            let (lo, hi) = t.int_range();
            if i < lo || i > hi {
                return Err(fail());
            }
            Value::Int(i)
        }
        (_, t) if t.is_float() => match v {
            Value::Int(i) => Value::Float(*i as f64),
            Value::Float(f) => Value::Float(*f),
            Value::Text(s) => Value::Float(s.trim().parse::<f64>().map_err(|_| fail())?),
            _ => return Err(fail()),
        },
        (_, ScalarType::Text) => Value::Text(match v {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Bool(b) => b.to_string(),
            Value::Timestamp(ts) => format_timestamp(*ts),
            other => other.to_string(),
        }),
        (Value::Timestamp(ts), ScalarType::Timestamp) => Value::Timestamp(*ts),
        (Value::Text(s), ScalarType::Timestamp) => Value::Timestamp(parse_timestamp(s).ok_or_else(fail)?),
        _ => return Err(fail()),
    };
    Ok(out)
}

/// Coerces `v` to `t` only if the conversion preserves the value exactly,
/// i.e. the result compares equal to the input.
pub fn coerce_exact(v: &Value, t: ScalarType) -> Option<Value> {
    let out = coerce(v, t).ok()?;
    match (v, &out) {
        (Value::Text(_), Value::Text(_)) => Some(out),
        (Value::Text(_), _) | (_, Value::Text(_)) => None,
        _ if super::compare(v, &out) == Some(std::cmp::Ordering::Equal) => Some(out),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coerce_examples() {
        assert_eq!(coerce(&Value::text("00001"), ScalarType::SmallInt).unwrap(), Value::Int(1));
        assert_eq!(coerce(&Value::Null, ScalarType::Text).unwrap(), Value::Null);
        assert_eq!(coerce(&Value::Int(5), ScalarType::Text).unwrap(), Value::text("5"));
        assert_eq!(coerce(&Value::Float(2.5), ScalarType::Text).unwrap(), Value::text("2.5"));
        assert_eq!(coerce(&Value::Float(-10.0), ScalarType::Text).unwrap(), Value::text("-10"));
        assert!(coerce(&Value::text("abc"), ScalarType::Int).is_err());
        assert!(coerce(&Value::Int(70000), ScalarType::SmallInt).is_err());
        assert!(coerce(&Value::Float(1.5), ScalarType::Int).is_err());
        assert_eq!(coerce(&Value::Int(3), ScalarType::Int).unwrap(), Value::Int(3));
    }

    #[test]
    fn timestamps() {
        let t = parse_timestamp("2020-01-02 03:04:05").unwrap();
        assert_eq!(format_timestamp(t), "2020-01-02 03:04:05");
        let t2 = parse_timestamp("2020-01-02 03:04:05.000250").unwrap();
        assert_eq!(t2 - t, 250);
        assert_eq!(format_timestamp(t2), "2020-01-02 03:04:05.000250");
        assert!(parse_timestamp("2020-01-02T03:04:05").is_none());
        assert!(parse_timestamp("2020-01-02").is_none());
        assert!(coerce(&Value::text("yesterday"), ScalarType::Timestamp).is_err());
    }

    fn scalar_of(t: ScalarType) -> BoxedStrategy<Value> {
        match t {
            ScalarType::Bool => any::<bool>().prop_map(Value::Bool).boxed(),
            ScalarType::SmallInt => any::<i16>().prop_map(|i| Value::Int(i as i64)).boxed(),
            ScalarType::Int => any::<i32>().prop_map(|i| Value::Int(i as i64)).boxed(),
            ScalarType::BigInt => any::<i64>().prop_map(Value::Int).boxed(),
            ScalarType::Double | ScalarType::Numeric => {
                proptest::num::f64::NORMAL.prop_map(Value::Float).boxed()
            }
            ScalarType::Text => ".*".prop_map(Value::Text).boxed(),
            ScalarType::Timestamp => (-2_000_000_000_000_000i64..4_000_000_000_000_000)
                .prop_map(Value::Timestamp)
                .boxed(),
        }
    }

    fn typed_value() -> impl Strategy<Value = (ScalarType, Value)> {
        proptest::sample::select(ScalarType::ALL.to_vec()).prop_flat_map(|t| (Just(t), scalar_of(t)))
    }

    proptest! {
        #[test]
        fn text_round_trip((t, v) in typed_value()) {
            let text = coerce(&v, ScalarType::Text).unwrap();
            prop_assert_eq!(coerce(&text, t).unwrap(), v);
        }

        #[test]
        fn compare_is_antisymmetric_and_transitive(
            (a, b, c) in proptest::sample::select(ScalarType::ALL.to_vec())
                .prop_flat_map(|t| (scalar_of(t), scalar_of(t), scalar_of(t)))
        ) {
            use crate::relmodel::compare;
            let ab = compare(&a, &b).unwrap();
            prop_assert_eq!(ab, compare(&b, &a).unwrap().reverse());
            let bc = compare(&b, &c).unwrap();
            let ac = compare(&a, &c).unwrap();
            if ab != std::cmp::Ordering::Greater && bc != std::cmp::Ordering::Greater {
                prop_assert!(ac != std::cmp::Ordering::Greater);
            }
        }
    }
}
