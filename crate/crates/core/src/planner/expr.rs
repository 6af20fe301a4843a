//! Expressions bound to row positions.

use std::cmp::Ordering;

use crate::relmodel::{coerce, compare, path_ref, ScalarType, Value};
use crate::sqlfront::BinOp;

#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    Col(usize),
    Lit(Value),
    /// Value at `path` inside the document in column `col`, coerced to `ty`.
    Path { col: usize, path: String, ty: ScalarType },
    Binary { op: BinOp, left: Box<BExpr>, right: Box<BExpr> },
    Not(Box<BExpr>),
    Neg(Box<BExpr>),
    InList { expr: Box<BExpr>, list: Vec<BExpr>, negated: bool },
    IsNull { expr: Box<BExpr>, negated: bool },
    Cast { expr: Box<BExpr>, ty: ScalarType },
}

pub type EvalResult = Result<Value, String>;

fn truth(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        _ => None,
    }
}

fn from_truth(b: Option<bool>) -> Value {
    b.map(Value::Bool).unwrap_or(Value::Null)
}

fn arith(op: BinOp, l: &Value, r: &Value) -> EvalResult {
    let overflow = || format!("integer overflow in {l} {} {r}", op.symbol());
    match (l, r) {
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        (_, _) if op == BinOp::Div => {
            let (a, b) = (as_f64(l)?, as_f64(r)?);
            if b == 0.0 {
                return Err("division by zero".into());
            }
            Ok(Value::Float(a / b))
        }
        (Value::Int(a), Value::Int(b)) => {
            let v = match op {
                BinOp::Plus => a.checked_add(*b),
                BinOp::Minus => a.checked_sub(*b),
                _ => a.checked_mul(*b),
            };
            v.map(Value::Int).ok_or_else(overflow)
        }
        _ => {
            let (a, b) = (as_f64(l)?, as_f64(r)?);
            Ok(Value::Float(match op {
                BinOp::Plus => a + b,
                BinOp::Minus => a - b,
                _ => a * b,
            }))
        }
    }
}

fn as_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        other => Err(format!("arithmetic on non-numeric value {other}")),
    }
}

impl BExpr {
    pub fn col(i: usize) -> BExpr {
        BExpr::Col(i)
    }

    pub fn binary(op: BinOp, left: BExpr, right: BExpr) -> BExpr {
        BExpr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn eval(&self, row: &[Value]) -> EvalResult {
        match self {
            BExpr::Col(i) => Ok(row[*i].clone()),
            BExpr::Lit(v) => Ok(v.clone()),
            BExpr::Path { col, path, ty } => match &row[*col] {
                v @ Value::Document(_) => match path_ref(v, path) {
                    Some(x) => coerce(x, *ty).map_err(|e| format!("{path}: {e}")),
                    None => Ok(Value::Null),
                },
                _ => Ok(Value::Null),
            },
            BExpr::Binary { op, left, right } => {
                let (l, r) = (left.eval(row)?, right.eval(row)?);
                match op {
                    BinOp::And => Ok(match (truth(&l), truth(&r)) {
                        (Some(false), _) | (_, Some(false)) => Value::Bool(false),
                        (Some(true), Some(true)) => Value::Bool(true),
                        _ => Value::Null,
                    }),
                    BinOp::Or => Ok(match (truth(&l), truth(&r)) {
                        (Some(true), _) | (_, Some(true)) => Value::Bool(true),
                        (Some(false), Some(false)) => Value::Bool(false),
                        _ => Value::Null,
                    }),
                    op if op.is_comparison() => Ok(from_truth(compare(&l, &r).map(|o| match op {
                        BinOp::Eq => o == Ordering::Equal,
                        BinOp::NotEq => o != Ordering::Equal,
                        BinOp::Lt => o == Ordering::Less,
                        BinOp::LtEq => o != Ordering::Greater,
                        BinOp::Gt => o == Ordering::Greater,
                        _ => o != Ordering::Less,
                    }))),
                    op => arith(*op, &l, &r),
                }
            }
            BExpr::Not(e) => Ok(from_truth(truth(&e.eval(row)?).map(|b| !b))),
            BExpr::Neg(e) => match e.eval(row)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| format!("integer overflow in -{i}")),
                Value::Float(f) => Ok(Value::Float(-f)),
                Value::Null => Ok(Value::Null),
                other => Err(format!("cannot negate {other}")),
            },
            BExpr::InList { expr, list, negated } => {
                let v = expr.eval(row)?;
                if v.is_null() {
                    return Ok(Value::Null);
                }
                let mut unknown = false;
                for item in list {
                    match compare(&v, &item.eval(row)?) {
                        Some(Ordering::Equal) => return Ok(Value::Bool(!negated)),
                        None => unknown = true,
                        _ => {}
                    }
                }
                Ok(if unknown { Value::Null } else { Value::Bool(*negated) })
            }
            BExpr::IsNull { expr, negated } => Ok(Value::Bool(expr.eval(row)?.is_null() != *negated)),
            BExpr::Cast { expr, ty } => coerce(&expr.eval(row)?, *ty).map_err(|e| e.to_string()),
        }
    }

    /// True only when the predicate evaluates to TRUE.
    pub fn holds(&self, row: &[Value]) -> Result<bool, String> {
        Ok(self.eval(row)? == Value::Bool(true))
    }

    pub fn walk(&self, f: &mut impl FnMut(&BExpr)) {
        f(self);
        match self {
            BExpr::Binary { left, right, .. } => {
                left.walk(f);
                right.walk(f);
            }
            BExpr::Not(e) | BExpr::Neg(e) | BExpr::IsNull { expr: e, .. } | BExpr::Cast { expr: e, .. } => e.walk(f),
            BExpr::InList { expr, list, .. } => {
                expr.walk(f);
                list.iter().for_each(|e| e.walk(f));
            }
            _ => {}
        }
    }

    /// Row positions read by the expression.
    pub fn columns(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            BExpr::Col(i) | BExpr::Path { col: i, .. } => out.push(*i),
            _ => {}
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Rewrites column positions.
    pub fn remap(&self, f: &impl Fn(usize) -> usize) -> BExpr {
        let b = |e: &BExpr| Box::new(e.remap(f));
        match self {
            BExpr::Col(i) => BExpr::Col(f(*i)),
            BExpr::Lit(v) => BExpr::Lit(v.clone()),
            BExpr::Path { col, path, ty } => BExpr::Path {
                col: f(*col),
                path: path.clone(),
                ty: *ty,
            },
            BExpr::Binary { op, left, right } => BExpr::Binary {
                op: *op,
                left: b(left),
                right: b(right),
            },
            BExpr::Not(e) => BExpr::Not(b(e)),
            BExpr::Neg(e) => BExpr::Neg(b(e)),
            BExpr::InList { expr, list, negated } => BExpr::InList {
                expr: b(expr),
                list: list.iter().map(|e| e.remap(f)).collect(),
                negated: *negated,
            },
            BExpr::IsNull { expr, negated } => BExpr::IsNull {
                expr: b(expr),
                negated: *negated,
            },
            BExpr::Cast { expr, ty } => BExpr::Cast { expr: b(expr), ty: *ty },
        }
    }

    fn atomic(&self) -> bool {
        matches!(self, BExpr::Col(_) | BExpr::Lit(_) | BExpr::Path { .. } | BExpr::Cast { .. })
    }

    /// SQL-like rendering with column positions replaced by `names`.
    pub fn render(&self, names: &[String]) -> String {
        let sub = |e: &BExpr| {
            if e.atomic() {
                e.render(names)
            } else {
                format!("({})", e.render(names))
            }
        };
        match self {
            BExpr::Col(i) => names.get(*i).cloned().unwrap_or_else(|| format!("#{i}")),
            BExpr::Lit(v) => v.to_string(),
            BExpr::Path { col, path, ty } => format!("{}->'{path}'::{}", BExpr::Col(*col).render(names), ty.sql_name().to_lowercase()),
            BExpr::Binary { op, left, right } => format!("{} {} {}", sub(left), op.symbol(), sub(right)),
            BExpr::Not(e) => format!("NOT {}", sub(e)),
            BExpr::Neg(e) => format!("-{}", sub(e)),
            BExpr::InList { expr, list, negated } => {
                let items: Vec<String> = list.iter().map(|e| e.render(names)).collect();
                format!("{} {}IN ({})", sub(expr), if *negated { "NOT " } else { "" }, items.join(", "))
            }
            BExpr::IsNull { expr, negated } => format!("{} IS {}NULL", sub(expr), if *negated { "NOT " } else { "" }),
            BExpr::Cast { expr, ty } => format!("CAST({} AS {})", expr.render(names), ty.sql_name()),
        }
    }
}
