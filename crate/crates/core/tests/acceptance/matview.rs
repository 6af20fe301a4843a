//! Materialized view scenarios against a small docstore collection.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use polyqe::catalog::{Catalog, QualifiedName, ServerDef, StoreKind};
use polyqe::engine::Engine;
use polyqe::matview::ManualClock;
use polyqe::relmodel::{Document, Value};
use polyqe::stores::{object_path, DocCollection};

const ROWS: i64 = 300;

fn write_version(dir: &Path, ver: i64) {
    let mut c = DocCollection::new("events");
    for id in 0..ROWS {
        let mut d = Document::new();
        d.insert("ID".into(), Value::Int(id));
        d.insert("VER".into(), Value::Int(ver));
        d.insert("KIND".into(), Value::text(if id % 3 == 0 { "a" } else { "b" }));
        c.push(d).unwrap();
    }
    c.write_jsonl(&object_path(dir, StoreKind::Docstore, "events")).unwrap();
}

fn engine(dir: &Path, clock: Arc<ManualClock>) -> Engine {
    let e = Engine::new(Catalog::new()).with_clock(clock);
    e.add_server(ServerDef::new("ev", StoreKind::Docstore, &dir.display().to_string())).unwrap();
    e.execute(
        "CREATE FOREIGN TABLE src.events (id INT OPTIONS (mname 'ID'), ver INT OPTIONS (mname 'VER'), \
         kind TEXT OPTIONS (mname 'KIND')) SERVER ev OPTIONS (collection 'events')",
    )
    .unwrap();
    e
}

fn view_rows(e: &Engine, sql: &str) -> Vec<Vec<Value>> {
    e.query(sql).unwrap().rows.into_iter().map(|r| r.into_values()).collect()
}

/// Every check returns a description of the first violated expectation.
pub fn run() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_version(dir, 1);
    let clock = Arc::new(ManualClock::new(1_000));
    let e = engine(dir, clock.clone());
    let name = QualifiedName::new("mv", "per_kind");

    // create populates immediately and the view reads back its snapshot
    e.execute(
        "CREATE MATERIALIZED VIEW mv.per_kind AS SELECT kind, ver, COUNT(*) AS n FROM src.events \
         GROUP BY kind, ver REFRESH EVERY 60 SECONDS",
    )
    .map_err(|err| format!("create: {err}"))?;
    let stored: Vec<Vec<Value>> = e.views().get(&name).ok_or("no snapshot after create")?.iter().map(|r| r.values().to_vec()).collect();
    let read = view_rows(&e, "SELECT * FROM mv.per_kind");
    if read != stored {
        return Err(format!("view read {read:?} differs from stored {stored:?}"));
    }
    let mut expect = vec![
        vec![Value::text("a"), Value::Int(1), Value::Int(100)],
        vec![Value::text("b"), Value::Int(1), Value::Int(200)],
    ];
    let mut sorted = read.clone();
    sorted.sort_by_key(|r| format!("{r:?}"));
    if sorted != expect {
        return Err(format!("created view holds {sorted:?}"));
    }
    if e.next_due(&name) != Some(1_060) {
        return Err(format!("next_due after create is {:?}", e.next_due(&name)));
    }

    // source changes are invisible until a refresh
    write_version(dir, 2);
    if view_rows(&e, "SELECT * FROM mv.per_kind") != read {
        return Err("view changed without a refresh".into());
    }
    let tick = e.scheduler_tick(1_059);
    if !tick.refreshed.is_empty() || !tick.failures.is_empty() {
        return Err(format!("early tick did work: {tick:?}"));
    }
    let tick = e.scheduler_tick(1_060);
    if tick.refreshed != ["mv.per_kind"] || !tick.failures.is_empty() {
        return Err(format!("due tick: {tick:?}"));
    }
    if e.next_due(&name) != Some(1_120) {
        return Err(format!("next_due after tick is {:?}", e.next_due(&name)));
    }
    let mut got = view_rows(&e, "SELECT kind, ver, n FROM mv.per_kind ORDER BY kind");
    for r in &mut expect {
        r[1] = Value::Int(2);
    }
    if got != expect {
        return Err(format!("after tick: {got:?}"));
    }

    // manual refresh
    write_version(dir, 3);
    e.refresh_view(&name).map_err(|err| format!("refresh: {err}"))?;
    got = view_rows(&e, "SELECT ver FROM mv.per_kind");
    if got != [[Value::Int(3)], [Value::Int(3)]] {
        return Err(format!("after refresh: {got:?}"));
    }

    // an induced failure keeps the old snapshot and still advances the job
    let before = view_rows(&e, "SELECT * FROM mv.per_kind");
    std::fs::remove_file(object_path(dir, StoreKind::Docstore, "events")).unwrap();
    if e.refresh_view(&name).is_ok() {
        return Err("refresh succeeded with the source missing".into());
    }
    if view_rows(&e, "SELECT * FROM mv.per_kind") != before {
        return Err("failed refresh replaced the snapshot".into());
    }
    let tick = e.scheduler_tick(1_120);
    if tick.failures.len() != 1 || !tick.refreshed.is_empty() {
        return Err(format!("failing tick: {tick:?}"));
    }
    if e.next_due(&name) != Some(1_180) {
        return Err(format!("next_due after failed tick is {:?}", e.next_due(&name)));
    }
    if view_rows(&e, "SELECT * FROM mv.per_kind") != before {
        return Err("failed tick replaced the snapshot".into());
    }

    snapshot_isolation(dir, clock)
}

/// A reader sees either the whole old snapshot or the whole new one while
/// refreshes run concurrently.
fn snapshot_isolation(dir: &Path, clock: Arc<ManualClock>) -> Result<(), String> {
    write_version(dir, 0);
    let e = engine(dir, clock);
    e.execute("CREATE MATERIALIZED VIEW mv.all_rows AS SELECT id, ver FROM src.events")
        .map_err(|err| format!("create: {err}"))?;
    let name = QualifiedName::new("mv", "all_rows");
    let done = AtomicBool::new(false);
    let (reads, bad) = std::thread::scope(|s| {
        let reader = s.spawn(|| {
            let mut reads = 0;
            let mut bad = None;
            while !done.load(Ordering::SeqCst) || reads == 0 {
                let rows = view_rows(&e, "SELECT id, ver FROM mv.all_rows");
                reads += 1;
                let vers: std::collections::BTreeSet<String> = rows.iter().map(|r| r[1].to_string()).collect();
                let mut ids: Vec<i64> = rows.iter().map(|r| r[0].as_int().unwrap()).collect();
                ids.sort();
                if vers.len() != 1 || ids != (0..ROWS).collect::<Vec<_>>() {
                    bad = Some(format!("torn read: versions {vers:?}, {} rows", rows.len()));
                    break;
                }
            }
            (reads, bad)
        });
        let mut err = None;
        for ver in 1..=8 {
            write_version(dir, ver);
            if let Err(x) = e.refresh_view(&name) {
                err = Some(format!("refresh {ver}: {x}"));
                break;
            }
        }
        done.store(true, Ordering::SeqCst);
        let (reads, bad) = reader.join().unwrap();
        (reads, bad.or(err))
    });
    if let Some(b) = bad {
        return Err(b);
    }
    let last = view_rows(&e, "SELECT DISTINCT ver FROM mv.all_rows");
    if last != [[Value::Int(8)]] {
        return Err(format!("final snapshot versions {last:?} after {reads} reads"));
    }
    Ok(())
}
