use std::path::Path;

use super::*;
use crate::catalog::{ServerDef, StoreKind};
use crate::engine::Engine;
use crate::relmodel::Document;
use crate::sqlfront::{parse as parse_statement, Statement};
use crate::stores::{object_path, DocCollection, KvNamespace};

fn shop(dir: &Path) -> Engine {
    let mut c = DocCollection::new("stores");
    for (id, loc, sells) in [
        ("store::1", "Braga", vec![("Widget1", "red", 5), ("Widget2", "blue", 2)]),
        ("store::2", "Lisbon", vec![("Widget1", "red", 1)]),
    ] {
        let mut d = Document::new();
        d.insert("_id".into(), Value::text(id));
        d.insert("id".into(), Value::text(id));
        d.insert("location".into(), Value::text(loc));
        let items = sells
            .into_iter()
            .map(|(w, col, q)| {
                let mut s = Document::new();
                s.insert("widget".into(), Value::Document([("id".to_string(), Value::text(w)), ("color".to_string(), Value::text(col))].into_iter().collect()));
                s.insert("qty".into(), Value::Int(q));
                Value::Document(s)
            })
            .collect();
        d.insert("sells".into(), Value::Array(items));
        c.push(d).unwrap();
    }
    c.write_jsonl(&object_path(dir, StoreKind::Docstore, "stores")).unwrap();

    let mut ns = KvNamespace::default();
    ns.name = "prices".into();
    ns.entries.insert("Widget1".into(), "3".into());
    ns.entries.insert("Widget2".into(), "8".into());
    ns.write_csv(&object_path(dir, StoreKind::Kv, "prices")).unwrap();

    let e = Engine::new(Catalog::new());
    let d = dir.display().to_string();
    e.add_server(ServerDef::new("mdb", StoreKind::Docstore, &d)).unwrap();
    e.add_server(ServerDef::new("redis", StoreKind::Kv, &d)).unwrap();
    e.execute_script(
        "CREATE FOREIGN TABLE shop.stores (_id TEXT, id TEXT, location TEXT) SERVER mdb OPTIONS (collection 'stores');
         CREATE FOREIGN TABLE shop.stores_sells (_parent_id TEXT OPTIONS (mname '_id'), widget_id TEXT OPTIONS (mname 'sells.widget.id'),
             widget_color TEXT OPTIONS (mname 'sells.widget.color'), qty INT OPTIONS (mname 'sells.qty'))
             SERVER mdb OPTIONS (collection 'stores', pipe '[{\"$unwind\":\"$sells\"}]');
         CREATE FOREIGN TABLE shop.prices (key TEXT, value INT) SERVER redis OPTIONS (collection 'prices');",
    )
    .unwrap();
    e
}

fn planned(e: &Engine, sql: &str) -> PlannedQuery {
    match parse_statement(sql).unwrap() {
        Statement::Select(q) => e.plan(&q).unwrap(),
        other => panic!("not a query: {other:?}"),
    }
}

#[test]
fn select_constant_is_one_project() {
    let e = Engine::new(Catalog::new());
    assert_eq!(e.explain("SELECT 1").unwrap().lines().count(), 1);
    assert!(e.explain("SELECT 1").unwrap().starts_with("Project"));
}

#[test]
fn kv_join_keeps_residual_above_kv_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let e = shop(tmp.path());
    let sql = "SELECT s.widget_id, p.value FROM shop.stores_sells s JOIN shop.prices p ON p.key = s.widget_id WHERE p.value > 4";
    let p = planned(&e, sql);
    let text = p.explain();
    assert!(text.contains("HashJoin"), "{text}");
    let filter_over_kv = text
        .lines()
        .collect::<Vec<_>>()
        .windows(2)
        .any(|w| w[0].trim_start().starts_with("Filter") && w[1].contains("prices"));
    assert!(filter_over_kv, "{text}");
    let rows = e.query(sql).unwrap().rows;
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].values(), [Value::text("Widget2"), Value::Int(8)]);
}

#[test]
fn forced_strategies_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let base = shop(tmp.path());
    let sql = "SELECT s.location, p.value FROM shop.stores s JOIN shop.stores_sells i ON i._parent_id = s._id \
               JOIN shop.prices p ON p.key = i.widget_id ORDER BY 1, 2";
    let mut results = Vec::new();
    for force in [None, Some(JoinStrategy::Bind), Some(JoinStrategy::Hash)] {
        let e = Engine::new(base.catalog().clone()).with_config(PlannerConfig { force_join: force, ..Default::default() });
        let text = e.explain(sql).unwrap();
        match force {
            // the kv wrapper accepts no filters, so its join stays a hash join
            Some(JoinStrategy::Bind) => assert!(text.contains("BindJoin") && text.matches("HashJoin").count() == 1, "{text}"),
            Some(JoinStrategy::Hash) => assert!(!text.contains("BindJoin"), "{text}"),
            None => {}
        }
        results.push(e.query(sql).unwrap().rows);
    }
    assert_eq!(results[0].len(), 3);
    assert!(results.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn pruning_keeps_referenced_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let e = shop(tmp.path());
    let sql = "SELECT qty FROM shop.stores_sells WHERE widget_color = 'red' OR qty + 1 > 4";
    let p = planned(&e, sql);
    let scans = p.plan.scans();
    assert_eq!(scans.len(), 1);
    let names: Vec<&str> = scans[0].required.iter().map(|i| scans[0].table.schema.columns()[*i].name.as_str()).collect();
    // the OR is not pushable, so the mediator needs both columns
    assert!(names.contains(&"qty") && names.contains(&"widget_color"), "{names:?}");
    assert!(!names.contains(&"widget_id") && !names.contains(&"_parent_id"), "{names:?}");
    assert_eq!(e.query(sql).unwrap().rows.len(), 2);

    // a filter the store evaluates does not need its column shipped back
    let p = planned(&e, "SELECT qty FROM shop.stores_sells WHERE widget_color = 'red'");
    let scan = p.plan.scans()[0];
    assert!(scan.residual.is_empty());
    assert_eq!(scan.required.len(), 1);
}

#[test]
fn braga_red_pipeline_order() {
    let tmp = tempfile::tempdir().unwrap();
    let e = shop(tmp.path());
    let sql = "SELECT s.id, i.qty FROM shop.stores s JOIN shop.stores_sells i ON i._parent_id = s._id \
               WHERE s.location = 'Braga' AND i.widget_color = 'red'";
    let text = e.explain(sql).unwrap();
    let line = text.lines().find(|l| l.contains("$unwind")).expect(&text);
    let unwind = line.find("$unwind").unwrap();
    let color = line.find("sells.widget.color").expect(line);
    assert!(unwind < color, "{line}");
    let rows = e.query(sql).unwrap().rows;
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].values(), [Value::text("store::1"), Value::Int(5)]);
}

#[test]
fn masked_capabilities_push_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let base = shop(tmp.path());
    let e = Engine::new(base.catalog().clone()).with_config(PlannerConfig { capability_mask: Capabilities::NONE, ..Default::default() });
    let p = planned(&e, "SELECT qty FROM shop.stores_sells WHERE widget_color = 'red'");
    let scan = p.plan.scans()[0];
    assert!(scan.accepted.is_empty());
    assert_eq!(scan.residual.len(), scan.filters.len());
    assert!(!scan.projection_accepted);
    assert_eq!(e.query("SELECT qty FROM shop.stores_sells WHERE widget_color = 'red'").unwrap().rows.len(), 2);
}

#[test]
fn unknown_column_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let e = shop(tmp.path());
    let q = match parse_statement("SELECT nope FROM shop.stores").unwrap() {
        Statement::Select(q) => q,
        _ => unreachable!(),
    };
    assert!(e.plan(&q).is_err());
}
