//! Aggregate accumulators. The mediator executor and the document-store
//! `$group` stage share this code so that pushed-down and mediator-side
//! aggregation agree bit for bit.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::relmodel::{compare, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggFunc {
    CountStar,
    Count,
    CountDistinct,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::CountStar | AggFunc::Count | AggFunc::CountDistinct => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

#[derive(Debug, Clone)]
enum State {
    Count(i64),
    Distinct(HashSet<Value>),
    Numeric { ints: i128, floats: Vec<f64>, count: i64, any_float: bool },
    Extreme(Option<Value>),
}

/// Running state of one aggregate call for one group.
#[derive(Debug, Clone)]
pub struct Accumulator {
    func: AggFunc,
    state: State,
}

impl Accumulator {
    pub fn new(func: AggFunc) -> Self {
        let state = match func {
            AggFunc::CountStar | AggFunc::Count => State::Count(0),
            AggFunc::CountDistinct => State::Distinct(HashSet::new()),
            AggFunc::Sum | AggFunc::Avg => State::Numeric {
                ints: 0,
                floats: Vec::new(),
                count: 0,
                any_float: false,
            },
            AggFunc::Min | AggFunc::Max => State::Extreme(None),
        };
        Accumulator { func, state }
    }

    /// Folds one input value. Nulls are ignored by everything but COUNT(*).
    pub fn update(&mut self, v: &Value) -> Result<(), String> {
        if self.func == AggFunc::CountStar {
            if let State::Count(n) = &mut self.state {
                *n += 1;
            }
            return Ok(());
        }
        if v.is_null() {
            return Ok(());
        }
        match &mut self.state {
            State::Count(n) => *n += 1,
            State::Distinct(set) => {
                set.insert(v.clone());
            }
            State::Numeric { ints, floats, count, any_float } => {
                match v {
                    Value::Int(i) => *ints += *i as i128,
                    Value::Float(f) => {
                        *any_float = true;
                        floats.push(*f);
                    }
                    other => return Err(format!("{} over non-numeric value {other}", self.func.name())),
                }
                *count += 1;
            }
            State::Extreme(cur) => {
                let replace = match cur {
                    None => true,
                    Some(c) => {
                        let o = compare(v, c).ok_or_else(|| format!("{} over incomparable values", self.func.name()))?;
                        if self.func == AggFunc::Min {
                            o == Ordering::Less
                        } else {
                            o == Ordering::Greater
                        }
                    }
                };
                if replace {
                    *cur = Some(v.clone());
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Value {
        match &self.state {
            State::Count(n) => Value::Int(*n),
            State::Distinct(set) => Value::Int(set.len() as i64),
            State::Numeric { ints, floats, count, any_float } => {
                if *count == 0 {
                    return Value::Null;
                }
                if !any_float {
                    return match self.func {
                        AggFunc::Avg => Value::Float(*ints as f64 / *count as f64),
                        _ => i64::try_from(*ints).map(Value::Int).unwrap_or(Value::Float(*ints as f64)),
                    };
                }
                // order-independent float summation
                let mut fs = floats.clone();
                fs.sort_by(f64::total_cmp);
                let sum = fs.iter().fold(*ints as f64, |acc, f| acc + f);
                match self.func {
                    AggFunc::Avg => Value::Float(sum / *count as f64),
                    _ => Value::Float(sum),
                }
            }
            State::Extreme(v) => v.clone().unwrap_or(Value::Null),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(func: AggFunc, vals: &[Value]) -> Value {
        let mut a = Accumulator::new(func);
        for v in vals {
            a.update(v).unwrap();
        }
        a.finish()
    }

    #[test]
    fn null_semantics() {
        let vals = [Value::Null, Value::Int(3), Value::Int(1), Value::Null];
        assert_eq!(run(AggFunc::CountStar, &vals), Value::Int(4));
        assert_eq!(run(AggFunc::Count, &vals), Value::Int(2));
        assert_eq!(run(AggFunc::Sum, &vals), Value::Int(4));
        assert_eq!(run(AggFunc::Avg, &vals), Value::Float(2.0));
        assert_eq!(run(AggFunc::Min, &vals), Value::Int(1));
        assert_eq!(run(AggFunc::Max, &vals), Value::Int(3));
        assert_eq!(run(AggFunc::Sum, &[Value::Null]), Value::Null);
        assert_eq!(run(AggFunc::Max, &[]), Value::Null);
        assert_eq!(run(AggFunc::CountStar, &[]), Value::Int(0));
    }

    #[test]
    fn distinct_count() {
        let vals = [Value::Int(1), Value::Int(1), Value::Int(2), Value::Null];
        assert_eq!(run(AggFunc::CountDistinct, &vals), Value::Int(2));
    }

    #[test]
    fn float_sum_is_order_independent() {
        let a = [Value::Float(1e16), Value::Float(1.0), Value::Float(-1e16), Value::Float(1.0)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(run(AggFunc::Sum, &a), run(AggFunc::Sum, &b));
        assert_eq!(run(AggFunc::Avg, &a), run(AggFunc::Avg, &b));
    }

    #[test]
    fn rejects_text_sum() {
        let mut a = Accumulator::new(AggFunc::Sum);
        assert!(a.update(&Value::text("x")).is_err());
    }
}
