//! Schema discovery over document samples and the derived relational
//! mapping: one outer table plus one child table per nested array.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde_json::json;

use crate::catalog::ServerDef;
use crate::relmodel::{ColumnDef, Document, Options, ScalarType, Value};
use crate::sqlfront::{CreateForeignTable, ObjectName};
use crate::stores::{wrapper_for, StoreError};
use crate::wrapper::TableDraft;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar(ScalarType),
    Array,
    Document,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Array => f.write_str("ARRAY"),
            FieldKind::Document => f.write_str("DOCUMENT"),
            FieldKind::Scalar(t) => f.write_str(match t {
                ScalarType::Bool => "BOOL",
                ScalarType::SmallInt => "SMALLINT",
                ScalarType::Int => "INT",
                ScalarType::BigInt => "BIGINT",
                ScalarType::Double => "DOUBLE",
                ScalarType::Numeric => "NUMERIC",
                ScalarType::Text => "TEXT",
                ScalarType::Timestamp => "TIMESTAMP",
            }),
        }
    }
}

fn kind_of(v: &Value) -> Option<FieldKind> {
    Some(match v {
        Value::Null => return None,
        Value::Bool(_) => FieldKind::Scalar(ScalarType::Bool),
        Value::Int(i) if i32::try_from(*i).is_ok() => FieldKind::Scalar(ScalarType::Int),
        Value::Int(_) => FieldKind::Scalar(ScalarType::BigInt),
        Value::Float(_) => FieldKind::Scalar(ScalarType::Double),
        Value::Text(_) => FieldKind::Scalar(ScalarType::Text),
        Value::Timestamp(_) => FieldKind::Scalar(ScalarType::Timestamp),
        Value::Array(_) => FieldKind::Array,
        Value::Document(_) => FieldKind::Document,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldStat {
    /// Sampled documents containing the path.
    pub count: usize,
    pub occurrence_prob: f64,
    /// Observed kinds of non-null values, as fractions of observations.
    pub type_histogram: IndexMap<FieldKind, f64>,
    /// For array paths: kinds of the scalar (and nested array) elements.
    pub element_histogram: IndexMap<FieldKind, f64>,
    type_counts: IndexMap<FieldKind, usize>,
    element_counts: IndexMap<FieldKind, usize>,
}

impl FieldStat {
    /// Majority kind; ties prefer ARRAY, then DOCUMENT, then TEXT.
    pub fn resolved_kind(&self) -> FieldKind {
        majority(&self.type_counts)
    }

    pub fn is_array(&self) -> bool {
        self.resolved_kind() == FieldKind::Array
    }

    fn scalar_elements(&self) -> Option<ScalarType> {
        let scalars: IndexMap<FieldKind, usize> =
            self.element_counts.iter().filter(|(k, _)| matches!(k, FieldKind::Scalar(_))).map(|(k, n)| (*k, *n)).collect();
        match majority(&scalars) {
            FieldKind::Scalar(t) if !scalars.is_empty() => Some(widen(t, &scalars)),
            _ => None,
        }
    }
}

fn majority(counts: &IndexMap<FieldKind, usize>) -> FieldKind {
    let Some(max) = counts.values().copied().max() else {
        return FieldKind::Scalar(ScalarType::Text);
    };
    let top: Vec<FieldKind> = counts.iter().filter(|(_, n)| **n == max).map(|(k, _)| *k).collect();
    if top.len() == 1 {
        top[0]
    } else if top.contains(&FieldKind::Array) {
        FieldKind::Array
    } else if top.contains(&FieldKind::Document) {
        FieldKind::Document
    } else {
        FieldKind::Scalar(ScalarType::Text)
    }
}

/// INT widens to BIGINT when larger integers were also seen.
fn widen(t: ScalarType, counts: &IndexMap<FieldKind, usize>) -> ScalarType {
    if t == ScalarType::Int && counts.contains_key(&FieldKind::Scalar(ScalarType::BigInt)) {
        ScalarType::BigInt
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticSchema {
    pub collection: String,
    pub sample_size: usize,
    /// Paths in order of first appearance in the sample.
    pub fields: IndexMap<String, FieldStat>,
}

impl ProbabilisticSchema {
    pub fn field(&self, path: &str) -> Option<&FieldStat> {
        self.fields.get(path)
    }

    /// One line per path: `path prob kind:fraction ...`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (p, f) in &self.fields {
            let hist: Vec<String> = f.type_histogram.iter().map(|(k, x)| format!("{k}:{x:.3}")).collect();
            out.push_str(&format!("{p} {:.3} {}\n", f.occurrence_prob, hist.join(" ")));
        }
        out
    }
}

#[derive(Default)]
struct Observations {
    order: IndexMap<String, ()>,
    present: HashMap<String, usize>,
    types: HashMap<String, IndexMap<FieldKind, usize>>,
    elements: HashMap<String, IndexMap<FieldKind, usize>>,
}

impl Observations {
    fn walk(&mut self, doc: &Document, prefix: &str, seen: &mut HashSet<String>) {
        for (k, v) in doc {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            self.order.entry(path.clone()).or_default();
            seen.insert(path.clone());
            let Some(kind) = kind_of(v) else { continue };
            *self.types.entry(path.clone()).or_default().entry(kind).or_default() += 1;
            match v {
                Value::Document(inner) => self.walk(inner, &path, seen),
                Value::Array(items) => {
                    for item in items {
                        match item {
                            Value::Document(inner) => self.walk(inner, &path, seen),
                            other => {
                                if let Some(k) = kind_of(other) {
                                    *self.elements.entry(path.clone()).or_default().entry(k).or_default() += 1;
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

fn fractions(counts: &IndexMap<FieldKind, usize>) -> IndexMap<FieldKind, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(k, n)| (*k, *n as f64 / total as f64)).collect()
}

/// Profiles the first `sample_limit` documents.
pub fn infer<'a>(collection: &str, docs: impl IntoIterator<Item = &'a Document>, sample_limit: usize) -> ProbabilisticSchema {
    let mut obs = Observations::default();
    let mut n = 0;
    for doc in docs.into_iter().take(sample_limit.max(1)) {
        n += 1;
        let mut seen = HashSet::new();
        obs.walk(doc, "", &mut seen);
        for p in seen {
            *obs.present.entry(p).or_default() += 1;
        }
    }
    let fields = obs
        .order
        .keys()
        .map(|p| {
            let count = obs.present[p];
            let type_counts = obs.types.remove(p).unwrap_or_default();
            let element_counts = obs.elements.remove(p).unwrap_or_default();
            let stat = FieldStat {
                count,
                occurrence_prob: count as f64 / n as f64,
                type_histogram: fractions(&type_counts),
                element_histogram: fractions(&element_counts),
                type_counts,
                element_counts,
            };
            (p.clone(), stat)
        })
        .collect();
    ProbabilisticSchema {
        collection: collection.to_string(),
        sample_size: n,
        fields,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingOptions {
    pub parent_id: bool,
    pub min_prob: f64,
}

impl Default for MappingOptions {
    fn default() -> Self {
        MappingOptions {
            parent_id: true,
            min_prob: 0.0,
        }
    }
}

fn flat_name(path: &str) -> String {
    path.to_lowercase().replace('.', "_")
}

fn is_under(path: &str, prefix: &str) -> bool {
    path.len() > prefix.len() && path.starts_with(prefix) && path.as_bytes()[prefix.len()] == b'.'
}

struct TableBuilder {
    name: String,
    columns: Vec<ColumnDef>,
    used: HashSet<String>,
}

impl TableBuilder {
    fn new(name: String) -> Self {
        TableBuilder {
            name,
            columns: Vec::new(),
            used: HashSet::new(),
        }
    }

    fn add(&mut self, name: String, ty: ScalarType, mname: &str) {
        let mut unique = name.clone();
        let mut k = 2;
        while !self.used.insert(unique.clone()) {
            unique = format!("{name}_{k}");
            k += 1;
        }
        self.columns.push(ColumnDef::new(unique, ty).with_option("mname", mname));
    }
}

/// Outer table first, then child tables in order of their array paths'
/// first appearance.
pub fn derive_mapping(ps: &ProbabilisticSchema, table: &str, opts: &MappingOptions) -> Vec<TableDraft> {
    let kept = |f: &FieldStat| f.occurrence_prob >= opts.min_prob;
    let arrays: Vec<&String> = ps.fields.iter().filter(|(_, f)| f.is_array() && kept(f)).map(|(p, _)| p).collect();
    let dropped_arrays: Vec<&String> = ps.fields.iter().filter(|(_, f)| f.is_array() && !kept(f)).map(|(p, _)| p).collect();
    let owner = |p: &str| -> Option<&String> { arrays.iter().copied().filter(|a| is_under(p, a)).max_by_key(|a| a.len()) };

    let mut outer = TableBuilder::new(table.to_string());
    let mut children: IndexMap<&String, TableBuilder> = IndexMap::new();
    let mut used_tables: HashSet<String> = HashSet::from([table.to_string()]);
    for a in &arrays {
        let mut name = format!("{table}_{}", flat_name(a));
        let base = name.clone();
        let mut k = 2;
        while !used_tables.insert(name.clone()) {
            name = format!("{base}_{k}");
            k += 1;
        }
        let mut child = TableBuilder::new(name);
        if opts.parent_id {
            child.add("_parent_id".into(), ScalarType::Text, "_id");
        }
        children.insert(*a, child);
    }
    for (p, f) in &ps.fields {
        if !kept(f) || dropped_arrays.iter().any(|a| is_under(p, a)) {
            continue;
        }
        let FieldKind::Scalar(t) = f.resolved_kind() else { continue };
        let ty = widen(t, &f.type_counts);
        match owner(p) {
            None => outer.add(flat_name(p), ty, p),
            Some(a) => {
                let rel = &p[a.len() + 1..];
                children.get_mut(a).expect("child per array").add(flat_name(rel), ty, p);
            }
        }
    }
    for (a, child) in children.iter_mut() {
        if let Some(t) = ps.fields[*a].scalar_elements() {
            child.add("value".into(), t, a);
        }
    }
    let mut out = Vec::new();
    let mut options = Options::new();
    options.insert("collection".into(), ps.collection.clone());
    if !outer.columns.is_empty() {
        out.push(TableDraft {
            name: outer.name,
            columns: outer.columns,
            options: options.clone(),
        });
    }
    for (a, child) in children {
        let data_cols = child.columns.iter().filter(|c| c.name != "_parent_id").count();
        if data_cols == 0 {
            continue;
        }
        let mut chain: Vec<&String> = arrays.iter().copied().filter(|x| is_under(a, x) || x == &a).collect();
        chain.sort_by_key(|x| x.len());
        let stages: Vec<serde_json::Value> = chain.iter().map(|x| json!({"$unwind": format!("${x}")})).collect();
        let mut opts = options.clone();
        opts.insert("pipe".into(), serde_json::Value::Array(stages).to_string());
        out.push(TableDraft {
            name: child.name,
            columns: child.columns,
            options: opts,
        });
    }
    out
}

/// DDL for a draft placed in schema `into` on `server`.
pub fn draft_to_create(d: &TableDraft, into: &str, server: &str) -> CreateForeignTable {
    CreateForeignTable {
        name: ObjectName::new(Some(into), &d.name),
        columns: d.columns.clone(),
        server: server.to_string(),
        options: d.options.clone(),
    }
}

/// Imported table DDL plus per-object failures.
pub fn import_foreign_schema(
    server: &ServerDef,
    into: &str,
    sample_limit: usize,
) -> Result<(Vec<CreateForeignTable>, Vec<(String, String)>), StoreError> {
    let report = wrapper_for(server)?.import_schema(sample_limit)?;
    let stmts = report.tables.iter().map(|d| draft_to_create(d, into, &server.name)).collect();
    Ok((stmts, report.failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relmodel::{from_json, path_ref};
    use crate::sqlfront::render::create_foreign_table;
    use crate::stores::pipeline::{execute, Pipe};
    use proptest::prelude::*;

    fn doc(s: &str) -> Document {
        match from_json(&serde_json::from_str(s).unwrap()) {
            Value::Document(d) => d,
            _ => panic!("not an object"),
        }
    }

    fn widget_store() -> Document {
        doc(r#"{"_id": "oid:1", "id": "store::1", "location": "Braga", "sells": [
            {"widget": {"id": "Widget1", "color": "red"}, "qty": 5},
            {"widget": {"id": "Widget2", "color": "blue"}, "qty": 2}]}"#)
    }

    fn cols(d: &TableDraft) -> Vec<(String, ScalarType)> {
        d.columns.iter().map(|c| (c.name.clone(), c.ty)).collect()
    }

    #[test]
    fn occurrence_and_histogram() {
        let docs = [doc(r#"{"x": 1}"#), doc(r#"{"x": 2}"#), doc(r#"{"y": "a"}"#)];
        let ps = infer("c", &docs, 100);
        let x = ps.field("x").unwrap();
        assert!((x.occurrence_prob - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(x.type_histogram.get(&FieldKind::Scalar(ScalarType::Int)), Some(&1.0));

        let docs = [doc(r#"{"x": 1}"#), doc(r#"{"x": "one"}"#)];
        let x = infer("c", &docs, 100).fields["x"].clone();
        assert_eq!(x.type_histogram.get(&FieldKind::Scalar(ScalarType::Int)), Some(&0.5));
        assert_eq!(x.type_histogram.get(&FieldKind::Scalar(ScalarType::Text)), Some(&0.5));
        assert_eq!(x.resolved_kind(), FieldKind::Scalar(ScalarType::Text));
        assert_eq!(infer("c", &[] as &[Document], 10).fields.len(), 0);
    }

    #[test]
    fn widget_store_paths() {
        let ps = infer("stores", &[widget_store()], 100);
        let kinds: Vec<(String, String)> = ps.fields.iter().map(|(p, f)| (p.clone(), f.resolved_kind().to_string())).collect();
        let want = [
            ("_id", "TEXT"),
            ("id", "TEXT"),
            ("location", "TEXT"),
            ("sells", "ARRAY"),
            ("sells.widget", "DOCUMENT"),
            ("sells.widget.id", "TEXT"),
            ("sells.widget.color", "TEXT"),
            ("sells.qty", "INT"),
        ];
        assert_eq!(kinds, want.map(|(a, b)| (a.to_string(), b.to_string())));
        assert!(ps.fields.values().all(|f| f.occurrence_prob == 1.0));
    }

    #[test]
    fn widget_store_mapping() {
        let ps = infer("stores", &[widget_store()], 100);
        let m = derive_mapping(&ps, "stores", &MappingOptions::default());
        assert_eq!(m.len(), 2);
        use ScalarType::*;
        let s = |x: &str| x.to_string();
        assert_eq!(m[0].name, "stores");
        assert_eq!(cols(&m[0]), vec![(s("_id"), Text), (s("id"), Text), (s("location"), Text)]);
        assert_eq!(m[0].options.get("pipe"), None);
        assert_eq!(m[1].name, "stores_sells");
        assert_eq!(
            cols(&m[1]),
            vec![(s("_parent_id"), Text), (s("widget_id"), Text), (s("widget_color"), Text), (s("qty"), Int)]
        );
        assert_eq!(m[1].options["pipe"], r#"[{"$unwind":"$sells"}]"#);
        let mnames: Vec<&str> = m[1].columns.iter().map(|c| c.options["mname"].as_str()).collect();
        assert_eq!(mnames, ["_id", "sells.widget.id", "sells.widget.color", "sells.qty"]);

        let no_parent = derive_mapping(&ps, "stores", &MappingOptions { parent_id: false, min_prob: 0.0 });
        assert_eq!(no_parent[1].columns[0].name, "widget_id");
    }

    #[test]
    fn flat_documents_give_one_table() {
        let ps = infer("t", &[doc(r#"{"a": 1, "b": {"c": "x"}}"#)], 10);
        let m = derive_mapping(&ps, "t", &MappingOptions::default());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), ["a", "b_c"]);
    }

    #[test]
    fn two_level_arrays() {
        let d = doc(r#"{"_id": 1, "a": [{"x": 1, "b": [{"y": "p"}, {"y": "q"}]}, {"x": 2, "b": [{"y": "r"}]}]}"#);
        let ps = infer("t", std::slice::from_ref(&d), 10);
        let m = derive_mapping(&ps, "t", &MappingOptions::default());
        let names: Vec<&str> = m.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["t", "t_a", "t_a_b"]);
        assert_eq!(m[2].options["pipe"], r#"[{"$unwind":"$a"},{"$unwind":"$a.b"}]"#);
        // brute-force enumeration of the innermost rows
        let mut brute = Vec::new();
        for a in d["a"].clone().into_array() {
            for b in path_ref(&a, "b").unwrap().clone().into_array() {
                brute.push(path_ref(&b, "y").unwrap().clone());
            }
        }
        let pipe = Pipe::parse(&m[2].options["pipe"]).unwrap();
        let rows = execute([&d], &pipe.stages).unwrap();
        let got: Vec<Value> = rows.iter().map(|r| path_ref(&Value::Document(r.clone()), "a.b.y").unwrap().clone()).collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn min_prob_and_scalar_arrays() {
        let docs = [doc(r#"{"a": 1, "tags": ["x", "y"]}"#), doc(r#"{"a": 2, "rare": true}"#)];
        let ps = infer("t", &docs, 10);
        let m = derive_mapping(&ps, "t", &MappingOptions { parent_id: true, min_prob: 0.6 });
        assert_eq!(m.len(), 1);
        assert_eq!(cols(&m[0]), vec![("a".to_string(), ScalarType::Int)]);
        let m = derive_mapping(&ps, "t", &MappingOptions::default());
        assert_eq!(m[1].name, "t_tags");
        assert_eq!(m[1].columns[1].name, "value");
        assert_eq!(m[1].columns[1].options["mname"], "tags");
    }

    #[test]
    fn mapping_is_deterministic_ddl() {
        let ps = infer("stores", &[widget_store()], 100);
        let render = |ps: &ProbabilisticSchema| -> Vec<String> {
            derive_mapping(ps, "stores", &MappingOptions::default())
                .iter()
                .map(|d| create_foreign_table(&draft_to_create(d, "m", "srv")))
                .collect()
        };
        assert_eq!(render(&ps), render(&infer("stores", &[widget_store()], 100)));
    }

    trait IntoArray {
        fn into_array(self) -> Vec<Value>;
    }

    impl IntoArray for Value {
        fn into_array(self) -> Vec<Value> {
            match self {
                Value::Array(a) => a,
                _ => panic!("not an array"),
            }
        }
    }

    fn maybe(v: Option<Value>, key: &str, d: &mut Document) {
        if let Some(v) = v {
            d.insert(key.to_string(), v);
        }
    }

    fn q_elem() -> impl Strategy<Value = Value> {
        prop::option::of("[a-c]{1,2}").prop_map(|r| {
            let mut d = Document::new();
            maybe(r.map(Value::text), "r", &mut d);
            Value::Document(d)
        })
    }

    fn arr_elem() -> impl Strategy<Value = Value> {
        (
            prop::option::of(0i64..5),
            prop::option::of(prop::collection::vec(q_elem(), 0..3)),
            prop::option::of(prop::option::of(0i64..3)),
        )
            .prop_map(|(p, q, s)| {
                let mut d = Document::new();
                maybe(p.map(Value::Int), "p", &mut d);
                maybe(q.map(Value::Array), "q", &mut d);
                if let Some(s) = s {
                    let mut inner = Document::new();
                    maybe(s.map(Value::Int), "t", &mut inner);
                    d.insert("s".into(), Value::Document(inner));
                }
                Value::Document(d)
            })
    }

    fn nested_doc() -> impl Strategy<Value = Document> {
        (
            prop::option::of(-3i64..3),
            "[a-z]{0,3}",
            prop::option::of(prop::collection::vec(arr_elem(), 0..3)),
            prop::option::of(prop::collection::vec("[xy]", 0..3)),
            prop::option::of((0i64..9, prop::option::of("[pq]"))),
        )
            .prop_map(|(a, b, arr, tags, d)| {
                let mut doc = Document::new();
                maybe(a.map(Value::Int), "a", &mut doc);
                doc.insert("b".into(), Value::text(b));
                maybe(arr.map(Value::Array), "arr", &mut doc);
                maybe(tags.map(|t| Value::Array(t.into_iter().map(Value::text).collect())), "tags", &mut doc);
                if let Some((x, y)) = d {
                    let mut inner = Document::new();
                    inner.insert("x".into(), Value::Int(x));
                    maybe(y.map(Value::text), "y", &mut inner);
                    doc.insert("d".into(), Value::Document(inner));
                }
                doc
            })
    }

    fn scalar_pairs(v: &Value, path: &str, out: &mut Vec<(String, Value)>) {
        match v {
            Value::Null => {}
            Value::Document(d) => {
                for (k, x) in d {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    scalar_pairs(x, &p, out);
                }
            }
            Value::Array(items) => items.iter().for_each(|x| scalar_pairs(x, path, out)),
            s => out.push((path.to_string(), s.clone())),
        }
    }

    proptest! {
        #[test]
        fn flattening_is_lossless(docs in prop::collection::vec(nested_doc(), 1..20)) {
            let docs: Vec<Document> = docs
                .into_iter()
                .enumerate()
                .map(|(i, mut d)| {
                    d.insert("_id".into(), Value::text(format!("oid:{}", i + 1)));
                    d.move_index(d.len() - 1, 0);
                    d
                })
                .collect();
            let ps = infer("t", &docs, 100);
            let mapping = derive_mapping(&ps, "t", &MappingOptions::default());
            for t in &mapping {
                for c in &t.columns {
                    prop_assert!(ps.fields.contains_key(&c.options["mname"]), "{} has no sampled path", c.options["mname"]);
                }
            }
            for d in &docs {
                let mut want = Vec::new();
                scalar_pairs(&Value::Document(d.clone()), "", &mut want);
                let mut got = Vec::new();
                for (ti, t) in mapping.iter().enumerate() {
                    let stages = t.options.get("pipe").map(|p| Pipe::parse(p).unwrap().stages).unwrap_or_default();
                    for row in execute([d], &stages).unwrap() {
                        let row = Value::Document(row);
                        for c in &t.columns {
                            let m = &c.options["mname"];
                            let v = path_ref(&row, m).cloned().unwrap_or(Value::Null);
                            if c.name == "_parent_id" {
                                prop_assert_eq!(&v, &d["_id"]);
                            } else if ti == 0 && m == "_id" {
                                got.push((m.clone(), v));
                            } else if !v.is_null() && !matches!(v, Value::Array(_) | Value::Document(_)) {
                                got.push((m.clone(), v));
                            }
                        }
                    }
                }
                want.sort_by(|a, b| (a.0.as_str(), a.1.to_string()).cmp(&(b.0.as_str(), b.1.to_string())));
                got.sort_by(|a, b| (a.0.as_str(), a.1.to_string()).cmp(&(b.0.as_str(), b.1.to_string())));
                prop_assert_eq!(got, want);
            }
        }
    }
}
