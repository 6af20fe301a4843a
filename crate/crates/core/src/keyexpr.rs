//! Composite row-key expressions: `cols:expr`, where `expr` concatenates
//! quoted literals and `str(col).zfill(n)` chains with `+`.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::relmodel::{coerce, ScalarType, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyExprError {
    #[error("composite key spec: empty column list")]
    EmptyColumns,
    #[error("composite key spec: missing ':' between column list and expression")]
    MissingColon,
    #[error("composite key spec: {message} at offset {offset}")]
    Syntax { offset: usize, message: String },
    #[error("composite key spec: identifier {0:?} is not in the column list")]
    UnknownIdent(String),
    #[error("composite key: no binding for column {0:?}")]
    MissingBinding(String),
    #[error("composite key: column {0:?} is NULL")]
    NullBinding(String),
    #[error("composite key: cannot render value of column {0:?} as text")]
    NotScalar(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Literal(String),
    Chain { ident: String, zfills: Vec<usize> },
}

/// Parsed key expression: a `+`-separated list of terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyExpr {
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeKeySpec {
    pub columns: Vec<String>,
    pub expr: KeyExpr,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    base: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> KeyExprError {
        KeyExprError::Syntax {
            offset: self.base + self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), KeyExprError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn ident(&mut self) -> Result<String, KeyExprError> {
        self.skip_ws();
        let len = self
            .rest()
            .char_indices()
            .find(|(i, c)| !(c.is_alphanumeric() || *c == '_') || (*i == 0 && c.is_ascii_digit()))
            .map(|(i, _)| i)
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err("expected identifier"));
        }
        let id = self.rest()[..len].to_string();
        self.pos += len;
        Ok(id)
    }

    fn posint(&mut self) -> Result<usize, KeyExprError> {
        self.skip_ws();
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        let n: usize = self.rest()[..len].parse().map_err(|_| self.err("expected positive integer"))?;
        if n == 0 {
            return Err(self.err("zfill width must be at least 1"));
        }
        self.pos += len;
        Ok(n)
    }

    fn literal(&mut self, quote: char) -> Result<String, KeyExprError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.rest().chars().next() else {
                self.pos = start;
                return Err(self.err("unterminated literal"));
            };
            self.pos += c.len_utf8();
            if c == quote {
                if self.rest().starts_with(quote) {
                    self.pos += 1;
                    out.push(quote);
                    continue;
                }
                return Ok(out);
            }
            out.push(c);
        }
    }

    fn term(&mut self) -> Result<Term, KeyExprError> {
        self.skip_ws();
        if let Some(q @ ('\'' | '"')) = self.rest().chars().next() {
            return Ok(Term::Literal(self.literal(q)?));
        }
        let first = self.ident()?;
        let ident = if first == "str" && self.eat("(") {
            let id = self.ident()?;
            self.expect(")")?;
            id
        } else {
            first
        };
        let mut zfills = Vec::new();
        while self.eat(".") {
            let method = self.ident()?;
            if method != "zfill" {
                return Err(self.err(format!("unsupported method {method:?} (only zfill)")));
            }
            self.expect("(")?;
            zfills.push(self.posint()?);
            self.expect(")")?;
        }
        Ok(Term::Chain { ident, zfills })
    }
}

impl KeyExpr {
    fn parse(src: &str, base: usize) -> Result<KeyExpr, KeyExprError> {
        let mut c = Cursor { src, pos: 0, base };
        let mut terms = vec![c.term()?];
        while c.eat("+") {
            terms.push(c.term()?);
        }
        c.skip_ws();
        if !c.rest().is_empty() {
            return Err(c.err("unexpected trailing input"));
        }
        Ok(KeyExpr { terms })
    }

    fn idents(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            Term::Chain { ident, .. } => Some(ident.as_str()),
            Term::Literal(_) => None,
        })
    }
}

impl fmt::Display for KeyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            match t {
                Term::Literal(s) => write!(f, "'{}'", s.replace('\'', "''"))?,
                Term::Chain { ident, zfills } => {
                    write!(f, "str({ident})")?;
                    for n in zfills {
                        write!(f, ".zfill({n})")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for CompositeKeySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.columns.join(","), self.expr)
    }
}

/// Left-pads with zeros to `width`, keeping a leading sign in front.
pub fn zfill(s: &str, width: usize) -> String {
    let n = s.chars().count();
    if n >= width {
        return s.to_string();
    }
    let pad = "0".repeat(width - n);
    match s.strip_prefix(['+', '-']) {
        Some(rest) => format!("{}{pad}{rest}", &s[..1]),
        None => format!("{pad}{s}"),
    }
}

/// `str(v)`: canonical decimal for numbers, raw text for text.
fn str_of(col: &str, v: &Value) -> Result<String, KeyExprError> {
    match v {
        Value::Null => Err(KeyExprError::NullBinding(col.to_string())),
        Value::Array(_) | Value::Document(_) => Err(KeyExprError::NotScalar(col.to_string())),
        other => match coerce(other, ScalarType::Text) {
            Ok(Value::Text(s)) => Ok(s),
            _ => Err(KeyExprError::NotScalar(col.to_string())),
        },
    }
}

impl CompositeKeySpec {
    pub fn parse(option_value: &str) -> Result<CompositeKeySpec, KeyExprError> {
        let (cols, expr_src) = option_value.split_once(':').ok_or(KeyExprError::MissingColon)?;
        let columns: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).collect();
        if columns.iter().any(String::is_empty) {
            return Err(KeyExprError::EmptyColumns);
        }
        let expr = KeyExpr::parse(expr_src, cols.len() + 1)?;
        if let Some(bad) = expr.idents().find(|id| !columns.iter().any(|c| c == id)) {
            return Err(KeyExprError::UnknownIdent(bad.to_string()));
        }
        Ok(CompositeKeySpec { columns, expr })
    }

    pub fn eval(&self, bindings: &IndexMap<String, Value>) -> Result<String, KeyExprError> {
        let mut out = String::new();
        for t in &self.expr.terms {
            match t {
                Term::Literal(s) => out.push_str(s),
                Term::Chain { ident, zfills } => {
                    let v = bindings
                        .get(ident)
                        .ok_or_else(|| KeyExprError::MissingBinding(ident.clone()))?;
                    let mut s = str_of(ident, v)?;
                    for &n in zfills {
                        s = zfill(&s, n);
                    }
                    out.push_str(&s);
                }
            }
        }
        Ok(out)
    }

    /// The lookup key when `eq_filters` binds every spec column; `None`
    /// otherwise (including when a bound value cannot be rendered).
    pub fn key_from_equalities(&self, eq_filters: &IndexMap<String, Value>) -> Option<String> {
        if !self.columns.iter().all(|c| eq_filters.contains_key(c)) {
            return None;
        }
        self.eval(eq_filters).ok()
    }
}
