use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use polyqe::engine::Engine;
use polyqe::tpcc::{self, TpccParams};

const STORES: &str = r#"{"_id":"store::1","id":"store::1","location":"Braga","sells":[{"widget":{"id":"Widget1","color":"red"},"qty":5},{"widget":{"id":"Widget2","color":"blue"},"qty":2}]}
{"_id":"store::2","id":"store::2","location":"Lisbon","sells":[{"widget":{"id":"Widget1","color":"red"},"qty":1}]}
"#;

fn polyqe(state: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_polyqe"))
        .arg("--state")
        .arg(state)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = child.stdin.take().unwrap();
    if let Some(s) = stdin {
        input.write_all(s.as_bytes()).unwrap();
    }
    drop(input);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(o: Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    stdout(&o)
}

/// A state directory with the widget-store collection loaded and imported.
fn shop(dir: &Path) -> std::path::PathBuf {
    let state = dir.join("state");
    let file = dir.join("stores.jsonl");
    std::fs::write(&file, STORES).unwrap();
    ok(polyqe(&state, &["server", "add", "mongo", "--kind", "docstore"], None));
    let out = ok(polyqe(&state, &["load", "mongo", "stores", file.to_str().unwrap()], None));
    assert!(out.contains("loaded 2"), "{out}");
    state
}

#[test]
fn select_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(polyqe(tmp.path(), &["--tsv", "sql", "-c", "SELECT 1"], None));
    assert_eq!(out.lines().last(), Some("1"));
}

#[test]
fn import_schema_prints_then_applies() {
    let tmp = tempfile::tempdir().unwrap();
    let state = shop(tmp.path());
    let dry = ok(polyqe(&state, &["import-schema", "mongo", "--sample", "100"], None));
    assert!(dry.contains("CREATE FOREIGN TABLE ymdb.stores ("), "{dry}");
    assert!(dry.contains("CREATE FOREIGN TABLE ymdb.stores_sells ("), "{dry}");
    assert!(dry.contains(r#"pipe '[{"$unwind":"$sells"}]'"#), "{dry}");
    // without --apply nothing is registered
    let o = polyqe(&state, &["sql", "-c", "SELECT * FROM ymdb.stores"], None);
    assert_eq!(o.status.code(), Some(1));

    let applied = ok(polyqe(&state, &["import-schema", "mongo", "--apply"], None));
    assert_eq!(applied, dry);
    let q = "SELECT s.id, i.qty FROM ymdb.stores s JOIN ymdb.stores_sells i ON i._parent_id = s._id \
             WHERE s.location = 'Braga' AND i.widget_color = 'red'";
    let out = ok(polyqe(&state, &["--tsv", "sql", "-c", q], None));
    assert_eq!(out, "id\tqty\n'store::1'\t5\n");
}

#[test]
fn explain_shows_key_lookup() {
    let tmp = tempfile::tempdir().unwrap();
    let state = tmp.path().join("state");
    std::fs::create_dir_all(&state).unwrap();
    let data = tpcc::generate(&TpccParams::new(2, 3));
    tpcc::store::write_docstore(&data, &tmp.path().join("doc")).unwrap();
    tpcc::store::write_widecolumn(&data, &tmp.path().join("wide")).unwrap();
    let engine = Engine::open(&state).unwrap();
    tpcc::register(&engine, &data, &tmp.path().join("doc"), &tmp.path().join("wide")).unwrap();
    drop(engine);

    let sql = "SELECT * FROM cass.district WHERE d_id = 1 AND d_w_id = 2";
    let plan = ok(polyqe(&state, &["explain", "-c", sql], None));
    assert!(plan.contains("WHERE key = '0000100002'"), "{plan}");
    assert!(!plan.contains("Filter"), "{plan}");
    let rows = ok(polyqe(&state, &["--tsv", "sql", "-c", sql], None));
    assert_eq!(rows.lines().count(), 2, "{rows}");
}

#[test]
fn repl_reads_multiline_statements_until_eof() {
    let tmp = tempfile::tempdir().unwrap();
    let script = "SELECT\n  2 AS two\n;\nSELECT nope;\nSELECT 'a;b' AS s,\n 3 AS n; SELECT 4 AS four;\n";
    let o = polyqe(tmp.path(), &["--tsv", "sql"], Some(script));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "two\n2\ns\tn\n'a;b'\t3\nfour\n4\n");
    assert!(stderr(&o).contains("nope"), "{}", stderr(&o));
}

#[test]
fn repl_empty_input_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polyqe(tmp.path(), &["sql"], Some(""));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
}

#[test]
fn tsv_is_unpadded_and_table_is_aligned() {
    let tmp = tempfile::tempdir().unwrap();
    let state = shop(tmp.path());
    ok(polyqe(&state, &["import-schema", "mongo", "--apply"], None));
    let q = "SELECT id, location FROM ymdb.stores ORDER BY id";
    let tsv = ok(polyqe(&state, &["--tsv", "sql", "-c", q], None));
    assert_eq!(tsv, "id\tlocation\n'store::1'\t'Braga'\n'store::2'\t'Lisbon'\n");
    assert!(tsv.lines().all(|l| !l.contains("  ") && !l.ends_with(' ')));
    let table = ok(polyqe(&state, &["sql", "-c", q], None));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "id         | location");
    assert_eq!(lines[2], "'store::1' | 'Braga'");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["sql", "--bogus"], &["server", "add", "x", "--kind", "sql"], &[]] {
        let o = polyqe(tmp.path(), args, None);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains("Usage"), "{args:?}: {}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
}

#[test]
fn user_errors_exit_one_with_diagnostics_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    for sql in ["SELEC 1", "SELECT * FROM nowhere.t", "SELECT 1 +"] {
        let o = polyqe(tmp.path(), &["sql", "-c", sql], None);
        assert_eq!(o.status.code(), Some(1), "{sql}");
        assert!(stdout(&o).is_empty());
        assert!(stderr(&o).starts_with("error: "));
    }
    let o = polyqe(tmp.path(), &["load", "ghost", "x", "y.jsonl"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreadable_catalog_is_internal() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(tmp.path().join("catalog.json")).unwrap();
    let o = polyqe(tmp.path(), &["sql", "-c", "SELECT 1"], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn views_refresh_by_hand_and_by_scheduler() {
    let tmp = tempfile::tempdir().unwrap();
    let state = shop(tmp.path());
    ok(polyqe(&state, &["import-schema", "mongo", "--apply"], None));
    ok(polyqe(
        &state,
        &["sql", "-c", "CREATE MATERIALIZED VIEW mv.locs AS SELECT location FROM ymdb.stores REFRESH EVERY 1 SECONDS"],
        None,
    ));
    let out = ok(polyqe(&state, &["view", "refresh", "mv.locs"], None));
    assert!(out.starts_with("refreshed mv.locs: 2 rows"), "{out}");
    let out = ok(polyqe(&state, &["scheduler", "run", "--ticks", "2", "--interval", "1.2"], None));
    assert!(out.contains("refreshed mv.locs"), "{out}");
    let rows = ok(polyqe(&state, &["--tsv", "sql", "-c", "SELECT location FROM mv.locs ORDER BY location"], None));
    assert_eq!(rows, "location\n'Braga'\n'Lisbon'\n");

    let o = polyqe(&state, &["view", "refresh", "mv.missing"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scheduler_with_repl_stops_at_eof() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polyqe(tmp.path(), &["--tsv", "scheduler", "run", "--forever", "--with-repl"], Some("SELECT 5 AS n;\n"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "n\n5\n");
}

#[test]
fn bench_report_and_check() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["bench", "tpcc", "--backend", "docstore", "--warehouses", "1", "--seed", "9", "--transactions", "12", "--check"];
    let out = ok(polyqe(tmp.path(), &args, None));
    let keys: Vec<&str> = out.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        keys,
        ["backend", "warehouses", "seed", "mode", "transactions", "stock-level", "order-status", "failed", "elapsed_ms", "point_gets", "scans", "rows_emitted", "check"]
    );
    assert!(out.contains("check           ok (12 of 12 match)"), "{out}");
    let o = polyqe(tmp.path(), &["bench", "tpcc", "--backend", "kv"], None);
    assert_eq!(o.status.code(), Some(1));
}
