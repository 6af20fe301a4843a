//! Aggregation-pipeline subset understood by the document store:
//! `$match`, `$project`, `$unwind`, `$sort`, `$limit` and `$group`.

use std::cmp::Ordering;

use indexmap::IndexMap;
use serde_json::{json, Map, Value as Json};

use crate::accum::{AggFunc, Accumulator};
use crate::relmodel::parse_int_text;
use crate::relmodel::{coerce, compare, from_json, path_ref, set_path, sort_cmp, to_json, Document, ScalarType, Value};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOp {
    Eq,
    Ne,
    Gt,
    Gte,
    Lt,
    Lte,
    In,
}

impl MatchOp {
    pub fn name(self) -> &'static str {
        match self {
            MatchOp::Eq => "$eq",
            MatchOp::Ne => "$ne",
            MatchOp::Gt => "$gt",
            MatchOp::Gte => "$gte",
            MatchOp::Lt => "$lt",
            MatchOp::Lte => "$lte",
            MatchOp::In => "$in",
        }
    }

    fn from_name(s: &str) -> Option<MatchOp> {
        Some(match s {
            "$eq" => MatchOp::Eq,
            "$ne" => MatchOp::Ne,
            "$gt" => MatchOp::Gt,
            "$gte" => MatchOp::Gte,
            "$lt" => MatchOp::Lt,
            "$lte" => MatchOp::Lte,
            "$in" => MatchOp::In,
            _ => return None,
        })
    }
}

/// One `path: {op: literal}` condition. For `$in` the literal is an array.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchCond {
    pub path: String,
    pub op: MatchOp,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectItem {
    Include,
    Exclude,
    /// `"$path"`
    Path(String),
    /// `{"$convert": {"input": "$path", "to": <type>}}`
    Convert { path: String, to: ScalarType },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupId {
    Null,
    Path(String),
    Fields(Vec<(String, String)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupAcc {
    /// `{"$sum": 1}`
    Count,
    Sum(String),
    Avg(String),
    Min(String),
    Max(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Match(Vec<MatchCond>),
    Project(Vec<(String, ProjectItem)>),
    Unwind(String),
    Sort(Vec<(String, bool)>),
    Limit(u64),
    Group { id: GroupId, accs: Vec<(String, GroupAcc)> },
}

/// A `pipe` option value: a bare stage array or an `aggregate` envelope
/// whose extra options are carried along for display.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub collection: Option<String>,
    pub stages: Vec<Stage>,
    pub extra: Map<String, Json>,
}

fn bad(msg: impl Into<String>) -> StoreError {
    StoreError::Pipeline(msg.into())
}

fn field_ref(j: &Json) -> Option<String> {
    j.as_str()?.strip_prefix('$').filter(|p| !p.is_empty()).map(str::to_string)
}

fn convert_type(name: &str) -> Option<ScalarType> {
    Some(match name {
        "bool" => ScalarType::Bool,
        "int" => ScalarType::Int,
        "long" => ScalarType::BigInt,
        "double" => ScalarType::Double,
        "decimal" => ScalarType::Numeric,
        "string" => ScalarType::Text,
        "date" => ScalarType::Timestamp,
        _ => return None,
    })
}

pub fn convert_type_name(t: ScalarType) -> &'static str {
    match t {
        ScalarType::Bool => "bool",
        ScalarType::SmallInt | ScalarType::Int => "int",
        ScalarType::BigInt => "long",
        ScalarType::Double => "double",
        ScalarType::Numeric => "decimal",
        ScalarType::Text => "string",
        ScalarType::Timestamp => "date",
    }
}

fn single_key(j: &Json) -> Option<(&String, &Json)> {
    let o = j.as_object()?;
    if o.len() == 1 {
        o.iter().next()
    } else {
        None
    }
}

impl Stage {
    pub fn from_json(j: &Json) -> Result<Stage, StoreError> {
        let (name, arg) = single_key(j).ok_or_else(|| bad(format!("stage must be a one-key object: {j}")))?;
        match name.as_str() {
            "$match" => {
                let o = arg.as_object().ok_or_else(|| bad("$match expects an object"))?;
                let mut conds = Vec::new();
                for (path, pred) in o {
                    crate::relmodel::check_path(path).map_err(|e| bad(e.to_string()))?;
                    match pred.as_object() {
                        Some(ops) if ops.keys().all(|k| k.starts_with('$')) => {
                            for (op, lit) in ops {
                                let op = MatchOp::from_name(op).ok_or_else(|| bad(format!("unsupported match operator {op}")))?;
                                if op == MatchOp::In && !lit.is_array() {
                                    return Err(bad("$in expects an array"));
                                }
                                conds.push(MatchCond { path: path.clone(), op, value: from_json(lit) });
                            }
                        }
                        _ => conds.push(MatchCond { path: path.clone(), op: MatchOp::Eq, value: from_json(pred) }),
                    }
                }
                Ok(Stage::Match(conds))
            }
            "$project" => {
                let o = arg.as_object().ok_or_else(|| bad("$project expects an object"))?;
                if o.is_empty() {
                    return Err(bad("$project requires at least one field"));
                }
                let mut items = Vec::new();
                for (k, v) in o {
                    crate::relmodel::check_path(k).map_err(|e| bad(e.to_string()))?;
                    let item = match v {
                        Json::Bool(true) => ProjectItem::Include,
                        Json::Bool(false) => ProjectItem::Exclude,
                        Json::Number(n) if n.as_f64() == Some(0.0) => ProjectItem::Exclude,
                        Json::Number(_) => ProjectItem::Include,
                        Json::String(_) => ProjectItem::Path(field_ref(v).ok_or_else(|| bad(format!("bad field reference {v}")))?),
                        Json::Object(_) => {
                            let (op, spec) = single_key(v).ok_or_else(|| bad(format!("bad projection for {k}")))?;
                            if op != "$convert" {
                                return Err(bad(format!("unsupported projection operator {op}")));
                            }
                            let input = spec.get("input").and_then(field_ref).ok_or_else(|| bad("$convert needs input: \"$path\""))?;
                            let to = spec
                                .get("to")
                                .and_then(Json::as_str)
                                .and_then(convert_type)
                                .ok_or_else(|| bad("$convert needs a supported 'to' type"))?;
                            ProjectItem::Convert { path: input, to }
                        }
                        _ => return Err(bad(format!("bad projection for {k}"))),
                    };
                    items.push((k.clone(), item));
                }
                let excl = items.iter().filter(|(_, i)| *i == ProjectItem::Exclude).count();
                if excl > 0 && excl < items.len() && items.iter().any(|(k, i)| *i == ProjectItem::Exclude && k != "_id") {
                    return Err(bad("cannot mix exclusion (other than _id) with inclusion"));
                }
                Ok(Stage::Project(items))
            }
            "$unwind" => {
                let path = match arg {
                    Json::Object(o) => o.get("path").and_then(field_ref),
                    other => field_ref(other),
                };
                Ok(Stage::Unwind(path.ok_or_else(|| bad("$unwind expects \"$path\""))?))
            }
            "$sort" => {
                let o = arg.as_object().ok_or_else(|| bad("$sort expects an object"))?;
                let keys = o
                    .iter()
                    .map(|(k, v)| match v.as_i64() {
                        Some(1) => Ok((k.clone(), false)),
                        Some(-1) => Ok((k.clone(), true)),
                        _ => Err(bad("$sort direction must be 1 or -1")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if keys.is_empty() {
                    return Err(bad("$sort requires a key"));
                }
                Ok(Stage::Sort(keys))
            }
            "$limit" => {
                let n = arg.as_u64().filter(|n| *n > 0).ok_or_else(|| bad("$limit expects a positive integer"))?;
                Ok(Stage::Limit(n))
            }
            "$group" => {
                let o = arg.as_object().ok_or_else(|| bad("$group expects an object"))?;
                let id = match o.get("_id") {
                    None => return Err(bad("$group requires _id")),
                    Some(Json::Null) => GroupId::Null,
                    Some(Json::Object(fields)) => GroupId::Fields(
                        fields
                            .iter()
                            .map(|(k, v)| field_ref(v).map(|p| (k.clone(), p)).ok_or_else(|| bad("group _id fields must be \"$path\"")))
                            .collect::<Result<_, _>>()?,
                    ),
                    Some(v) => GroupId::Path(field_ref(v).ok_or_else(|| bad("group _id must be null, \"$path\" or a document"))?),
                };
                let mut accs = Vec::new();
                for (k, v) in o.iter().filter(|(k, _)| *k != "_id") {
                    let (op, arg) = single_key(v).ok_or_else(|| bad(format!("bad accumulator for {k}")))?;
                    let acc = match (op.as_str(), field_ref(arg)) {
                        ("$sum", None) if arg.as_i64() == Some(1) => GroupAcc::Count,
                        ("$count", None) if arg.as_object().is_some_and(Map::is_empty) => GroupAcc::Count,
                        ("$sum", Some(p)) => GroupAcc::Sum(p),
                        ("$avg", Some(p)) => GroupAcc::Avg(p),
                        ("$min", Some(p)) => GroupAcc::Min(p),
                        ("$max", Some(p)) => GroupAcc::Max(p),
                        _ => return Err(bad(format!("unsupported accumulator {op} for {k}"))),
                    };
                    accs.push((k.clone(), acc));
                }
                Ok(Stage::Group { id, accs })
            }
            other => Err(bad(format!("unknown stage {other}"))),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Stage::Match(conds) => {
                let mut m = Map::new();
                for c in conds {
                    let entry = m.entry(c.path.clone()).or_insert_with(|| Json::Object(Map::new()));
                    if let Json::Object(ops) = entry {
                        ops.insert(c.op.name().into(), to_json(&c.value));
                    }
                }
                json!({ "$match": m })
            }
            Stage::Project(items) => {
                let m: Map<String, Json> = items
                    .iter()
                    .map(|(k, i)| {
                        let v = match i {
                            ProjectItem::Include => json!(1),
                            ProjectItem::Exclude => json!(0),
                            ProjectItem::Path(p) => json!(format!("${p}")),
                            ProjectItem::Convert { path, to } => {
                                json!({ "$convert": { "input": format!("${path}"), "to": convert_type_name(*to) } })
                            }
                        };
                        (k.clone(), v)
                    })
                    .collect();
                json!({ "$project": m })
            }
            Stage::Unwind(p) => json!({ "$unwind": format!("${p}") }),
            Stage::Sort(keys) => {
                let m: Map<String, Json> = keys.iter().map(|(k, d)| (k.clone(), json!(if *d { -1 } else { 1 }))).collect();
                json!({ "$sort": m })
            }
            Stage::Limit(n) => json!({ "$limit": n }),
            Stage::Group { id, accs } => {
                let mut m = Map::new();
                m.insert(
                    "_id".into(),
                    match id {
                        GroupId::Null => Json::Null,
                        GroupId::Path(p) => json!(format!("${p}")),
                        GroupId::Fields(fs) => Json::Object(fs.iter().map(|(k, p)| (k.clone(), json!(format!("${p}")))).collect()),
                    },
                );
                for (k, a) in accs {
                    let v = match a {
                        GroupAcc::Count => json!({ "$sum": 1 }),
                        GroupAcc::Sum(p) => json!({ "$sum": format!("${p}") }),
                        GroupAcc::Avg(p) => json!({ "$avg": format!("${p}") }),
                        GroupAcc::Min(p) => json!({ "$min": format!("${p}") }),
                        GroupAcc::Max(p) => json!({ "$max": format!("${p}") }),
                    };
                    m.insert(k.clone(), v);
                }
                json!({ "$group": m })
            }
        }
    }
}

impl Pipe {
    pub fn parse(text: &str) -> Result<Pipe, StoreError> {
        let j: Json = serde_json::from_str(text).map_err(|e| bad(format!("pipe is not valid JSON: {e}")))?;
        match j {
            Json::Array(stages) => Ok(Pipe {
                collection: None,
                stages: stages.iter().map(Stage::from_json).collect::<Result<_, _>>()?,
                extra: Map::new(),
            }),
            Json::Object(mut o) => {
                let stages = match o.remove("pipeline") {
                    Some(Json::Array(s)) => s.iter().map(Stage::from_json).collect::<Result<_, _>>()?,
                    _ => return Err(bad("pipe envelope needs a 'pipeline' array")),
                };
                let collection = match o.remove("aggregate") {
                    Some(Json::String(s)) => Some(s),
                    None => None,
                    Some(_) => return Err(bad("'aggregate' must name a collection")),
                };
                Ok(Pipe { collection, stages, extra: o })
            }
            _ => Err(bad("pipe must be a stage array or an aggregate envelope")),
        }
    }

    pub fn unwind_paths(&self) -> Vec<&str> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::Unwind(p) => Some(p.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn unwinds_only(&self) -> bool {
        self.stages.iter().all(|s| matches!(s, Stage::Unwind(_)))
    }
}

/// Compact JSON rendering of a stage list.
pub fn render_stages(stages: &[Stage]) -> String {
    Json::Array(stages.iter().map(Stage::to_json).collect()).to_string()
}

/// True when `path` reads through (or is a prefix of) the unwound `array`.
pub fn traverses(path: &str, array: &str) -> bool {
    let under = |a: &str, b: &str| a == b || (a.len() > b.len() && a.starts_with(b) && a.as_bytes()[b.len()] == b'.');
    under(path, array) || under(array, path)
}

/// Converts a stored value so that it can be compared with `lit`: numbers
/// compare numerically (numeric text is parsed), other literals coerce the
/// stored value to their own type. `None` when no sensible conversion exists.
pub(crate) fn comparable(stored: &Value, lit: &Value) -> Option<Value> {
    match (stored, lit) {
        (Value::Null, _) | (Value::Array(_), _) | (Value::Document(_), _) => None,
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => Some(stored.clone()),
        (Value::Text(s), Value::Int(_) | Value::Float(_)) => coerce(&Value::text(s.as_str()), ScalarType::BigInt)
            .or_else(|_| coerce(stored, ScalarType::Double))
            .ok(),
        (_, Value::Int(_) | Value::Float(_)) => None,
        (_, l) => coerce(stored, l.natural_type()?).ok(),
    }
}

fn holds(stored: Option<&Value>, op: MatchOp, lit: &Value) -> bool {
    let Some(stored) = stored else { return false };
    if op == MatchOp::In {
        return match lit {
            Value::Array(items) => items.iter().any(|l| holds(Some(stored), MatchOp::Eq, l)),
            _ => false,
        };
    }
    let ord = match (stored, lit) {
        // the common cases, without allocating
        (Value::Text(a), Value::Text(b)) => Some(a.as_str().cmp(b.as_str())),
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => compare(stored, lit),
        (Value::Text(s), Value::Int(_) | Value::Float(_)) => match parse_int_text(s) {
            Some(i) => compare(&Value::Int(i), lit),
            None => s.trim().parse::<f64>().ok().and_then(|f| compare(&Value::Float(f), lit)),
        },
        _ => comparable(stored, lit).and_then(|v| compare(&v, lit)),
    };
    let Some(ord) = ord else { return false };
    match op {
        MatchOp::Eq => ord == Ordering::Equal,
        MatchOp::Ne => ord != Ordering::Equal,
        MatchOp::Gt => ord == Ordering::Greater,
        MatchOp::Gte => ord != Ordering::Less,
        MatchOp::Lt => ord == Ordering::Less,
        MatchOp::Lte => ord != Ordering::Greater,
        MatchOp::In => unreachable!(),
    }
}

pub fn matches(doc: &Document, conds: &[MatchCond]) -> bool {
    let root = DocRef(doc);
    conds.iter().all(|c| holds(root.get(&c.path), c.op, &c.value))
}

struct DocRef<'a>(&'a Document);

impl<'a> DocRef<'a> {
    fn get(&self, path: &str) -> Option<&'a Value> {
        let (head, rest) = match path.split_once('.') {
            Some((h, r)) => (h, Some(r)),
            None => (path, None),
        };
        let v = self.0.get(head)?;
        match rest {
            None => Some(v),
            Some(r) => path_ref(v, r),
        }
    }
}

fn project(doc: &Document, items: &[(String, ProjectItem)]) -> Result<Document, StoreError> {
    let root = DocRef(doc);
    let exclusion = items.iter().all(|(_, i)| *i == ProjectItem::Exclude);
    if exclusion {
        let mut out = doc.clone();
        for (k, _) in items {
            remove_path(&mut out, k);
        }
        return Ok(out);
    }
    let mut out = Document::new();
    let keep_id = !items.iter().any(|(k, i)| k == "_id" && *i == ProjectItem::Exclude);
    if keep_id && !items.iter().any(|(k, _)| k == "_id") {
        if let Some(id) = doc.get("_id") {
            out.insert("_id".into(), id.clone());
        }
    }
    for (k, item) in items {
        let v = match item {
            ProjectItem::Exclude => continue,
            ProjectItem::Include => root.get(k).cloned(),
            ProjectItem::Path(p) => root.get(p).cloned(),
            ProjectItem::Convert { path, to } => match root.get(path) {
                None | Some(Value::Null) => Some(Value::Null),
                Some(v) => Some(coerce(v, *to).map_err(|e| {
                    let id = doc.get("_id").map(Value::to_string).unwrap_or_else(|| "?".into());
                    StoreError::Convert(format!("document {id}: {path}: {e}"))
                })?),
            },
        };
        if let Some(v) = v {
            set_path(&mut out, k, v);
        }
    }
    Ok(out)
}

fn remove_path(doc: &mut Document, path: &str) {
    match path.split_once('.') {
        None => {
            doc.shift_remove(path);
        }
        Some((h, r)) => {
            if let Some(Value::Document(inner)) = doc.get_mut(h) {
                remove_path(inner, r);
            }
        }
    }
}

pub(crate) fn unwind(mut doc: Document, path: &str, out: &mut Vec<Document>) -> Result<(), StoreError> {
    match DocRef(&doc).get(path) {
        None | Some(Value::Null) => Ok(()),
        Some(Value::Array(items)) => {
            let items = items.clone();
            // copies must not carry the array they replace
            set_path(&mut doc, path, Value::Null);
            for item in items {
                let mut copy = doc.clone();
                set_path(&mut copy, path, item);
                out.push(copy);
            }
            Ok(())
        }
        Some(other) => Err(StoreError::Pipeline(format!(
            "$unwind: {path} is a {} in document {}, not an array",
            other.kind_name(),
            doc.get("_id").map(Value::to_string).unwrap_or_default()
        ))),
    }
}

fn group(docs: Vec<Document>, id: &GroupId, accs: &[(String, GroupAcc)]) -> Result<Vec<Document>, StoreError> {
    let mut groups: IndexMap<Value, Vec<Accumulator>> = IndexMap::new();
    let funcs: Vec<AggFunc> = accs
        .iter()
        .map(|(_, a)| match a {
            GroupAcc::Count => AggFunc::CountStar,
            GroupAcc::Sum(_) => AggFunc::Sum,
            GroupAcc::Avg(_) => AggFunc::Avg,
            GroupAcc::Min(_) => AggFunc::Min,
            GroupAcc::Max(_) => AggFunc::Max,
        })
        .collect();
    for doc in &docs {
        let root = DocRef(doc);
        let key = match id {
            GroupId::Null => Value::Null,
            GroupId::Path(p) => root.get(p).cloned().unwrap_or(Value::Null),
            GroupId::Fields(fs) => Value::Document(
                fs.iter()
                    .map(|(k, p)| (k.clone(), root.get(p).cloned().unwrap_or(Value::Null)))
                    .collect(),
            ),
        };
        let state = groups
            .entry(key)
            .or_insert_with(|| funcs.iter().map(|f| Accumulator::new(*f)).collect());
        for ((_, acc), st) in accs.iter().zip(state.iter_mut()) {
            let input = match acc {
                GroupAcc::Count => Value::Null,
                GroupAcc::Sum(p) | GroupAcc::Avg(p) | GroupAcc::Min(p) | GroupAcc::Max(p) => {
                    root.get(p).cloned().unwrap_or(Value::Null)
                }
            };
            // non-numeric inputs are skipped by $sum and $avg
            if matches!(acc, GroupAcc::Sum(_) | GroupAcc::Avg(_)) && !matches!(input, Value::Int(_) | Value::Float(_)) {
                continue;
            }
            st.update(&input).map_err(StoreError::Pipeline)?;
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (key, state) in groups {
        let mut d = Document::new();
        d.insert("_id".into(), key);
        for ((name, acc), st) in accs.iter().zip(&state) {
            let v = match (acc, st.finish()) {
                (GroupAcc::Sum(_), Value::Null) => Value::Int(0),
                (_, v) => v,
            };
            d.insert(name.clone(), v);
        }
        out.push(d);
    }
    Ok(out)
}

fn root(path: &str) -> &str {
    path.split_once('.').map_or(path, |(h, _)| h)
}

/// Top-level fields the stages can observe, when an inclusion `$project` or
/// a `$group` hides everything else from later stages.
fn observed_roots(stages: &[Stage]) -> Option<Vec<&str>> {
    let mut roots = Vec::new();
    for s in stages {
        match s {
            Stage::Match(conds) => roots.extend(conds.iter().map(|c| root(&c.path))),
            Stage::Unwind(p) => roots.push(root(p)),
            Stage::Sort(keys) => roots.extend(keys.iter().map(|(k, _)| root(k))),
            Stage::Limit(_) => {}
            Stage::Project(items) => {
                if items.iter().all(|(_, i)| *i == ProjectItem::Exclude) {
                    return None;
                }
                roots.push("_id");
                for (k, i) in items {
                    match i {
                        ProjectItem::Include => roots.push(root(k)),
                        ProjectItem::Path(p) | ProjectItem::Convert { path: p, .. } => roots.push(root(p)),
                        ProjectItem::Exclude => {}
                    }
                }
                return Some(roots);
            }
            Stage::Group { id, accs } => {
                match id {
                    GroupId::Null => {}
                    GroupId::Path(p) => roots.push(root(p)),
                    GroupId::Fields(fs) => roots.extend(fs.iter().map(|(_, p)| root(p))),
                }
                for (_, a) in accs {
                    match a {
                        GroupAcc::Count => {}
                        GroupAcc::Sum(p) | GroupAcc::Avg(p) | GroupAcc::Min(p) | GroupAcc::Max(p) => roots.push(root(p)),
                    }
                }
                return Some(roots);
            }
        }
    }
    None
}

/// Runs `stages` over `docs` in order.
pub fn execute<'a>(docs: impl IntoIterator<Item = &'a Document>, stages: &[Stage]) -> Result<Vec<Document>, StoreError> {
    let mut iter = docs.into_iter();
    // leading matches filter before anything is copied, and only fields
    // some stage can observe are copied
    let lead = stages.iter().take_while(|s| matches!(s, Stage::Match(_))).count();
    let keep = observed_roots(stages);
    let mut cur: Vec<Document> = Vec::new();
    for d in iter.by_ref() {
        if stages[..lead].iter().all(|s| match s {
            Stage::Match(c) => matches(d, c),
            _ => true,
        }) {
            cur.push(match &keep {
                Some(roots) => d.iter().filter(|(k, _)| roots.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect(),
                None => d.clone(),
            });
        }
    }
    for stage in &stages[lead..] {
        cur = match stage {
            Stage::Match(c) => cur.into_iter().filter(|d| matches(d, c)).collect(),
            Stage::Project(items) => cur.iter().map(|d| project(d, items)).collect::<Result<_, _>>()?,
            Stage::Unwind(p) => {
                let mut out = Vec::with_capacity(cur.len());
                for d in cur {
                    unwind(d, p, &mut out)?;
                }
                out
            }
            Stage::Sort(keys) => {
                cur.sort_by(|a, b| {
                    for (k, desc) in keys {
                        let (ra, rb) = (DocRef(a), DocRef(b));
                        let null = Value::Null;
                        let o = sort_cmp(ra.get(k).unwrap_or(&null), rb.get(k).unwrap_or(&null));
                        let o = if *desc { o.reverse() } else { o };
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    Ordering::Equal
                });
                cur
            }
            Stage::Limit(n) => {
                cur.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
                cur
            }
            Stage::Group { id, accs } => group(cur, id, accs)?,
        };
    }
    Ok(cur)
}

/// Simplifies a stage list: adjacent projections whose second stage only
/// reads top-level fields produced by the first are merged, and a projection
/// identical to its predecessor is dropped.
pub fn simplify(stages: Vec<Stage>) -> Vec<Stage> {
    let mut out: Vec<Stage> = Vec::with_capacity(stages.len());
    for s in stages {
        if let (Some(Stage::Project(prev)), Stage::Project(next)) = (out.last(), &s) {
            if prev == next {
                continue;
            }
            if let Some(merged) = merge_projects(prev, next) {
                *out.last_mut().unwrap() = Stage::Project(merged);
                continue;
            }
        }
        out.push(s);
    }
    out
}

fn merge_projects(first: &[(String, ProjectItem)], second: &[(String, ProjectItem)]) -> Option<Vec<(String, ProjectItem)>> {
    if first.iter().any(|(k, i)| k.contains('.') || matches!(i, ProjectItem::Convert { .. } | ProjectItem::Exclude)) {
        return None;
    }
    let source = |field: &str| -> Option<String> {
        first.iter().find(|(k, _)| k == field).map(|(k, i)| match i {
            ProjectItem::Path(p) => p.clone(),
            _ => k.clone(),
        })
    };
    let mut merged = Vec::with_capacity(second.len());
    let mut drops_id = false;
    for (k, item) in second {
        let new = match item {
            ProjectItem::Exclude if k == "_id" => {
                drops_id = true;
                ProjectItem::Exclude
            }
            ProjectItem::Exclude => return None,
            ProjectItem::Include => {
                let src = source(k)?;
                if src == *k {
                    ProjectItem::Include
                } else {
                    ProjectItem::Path(src)
                }
            }
            ProjectItem::Path(p) => ProjectItem::Path(source(p)?),
            ProjectItem::Convert { path, to } => ProjectItem::Convert { path: source(path)?, to: *to },
        };
        merged.push((k.clone(), new));
    }
    // `_id` passes through the first stage implicitly unless it was excluded
    let first_keeps_id = !first.iter().any(|(k, i)| k == "_id" && *i == ProjectItem::Exclude);
    if !drops_id && !first_keeps_id {
        return None;
    }
    Some(merged)
}
