//! Push-down soundness: whatever a wrapper accepts, the rows that come back
//! are the rows a full scan plus mediator filtering would produce.

#[path = "acceptance/fuzz.rs"]
mod fuzz;

use std::path::Path;
use std::sync::OnceLock;

use polyqe::sqlfront::{parse, Statement};
use proptest::prelude::*;
use tempfile::TempDir;

const BACKENDS: [&str; 3] = ["docstore", "widecolumn", "kv"];

fn fixture(i: usize) -> &'static fuzz::Fixture {
    static CELLS: [OnceLock<(TempDir, fuzz::Fixture)>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let build: fn(&Path, u64) -> fuzz::Fixture = match i {
        0 => fuzz::docstore,
        1 => fuzz::widecolumn,
        _ => fuzz::kv,
    };
    &CELLS[i]
        .get_or_init(|| {
            let tmp = tempfile::tempdir().unwrap();
            let fx = build(tmp.path(), 7_000 + i as u64);
            (tmp, fx)
        })
        .1
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Default, no-push-down, forced-bind and forced-hash plans all agree
    /// with the reference interpreter.
    #[test]
    fn plan_variants_match_interpreter(backend in 0..3usize, seed in any::<u64>()) {
        let fx = fixture(backend);
        let queries = fuzz::generate(fx, seed, 6);
        let (_, failures) = fuzz::check(fx, &queries);
        prop_assert!(failures.is_empty(), "{}", failures.join("\n"));
    }

    /// When the store takes every filter, it emits exactly the matching rows;
    /// when it takes none, it emits the whole table.
    #[test]
    fn store_emits_only_matches(backend in 0..3usize, seed in any::<u64>()) {
        let fx = fixture(backend);
        for q in fuzz::filters(fx, seed, 6) {
            let table = &fx.tables[q.table()];
            let sql = q.sql(fx);
            let want = q.interpret(fx);
            let Statement::Select(ast) = parse(&sql).unwrap() else { unreachable!() };
            let planned = fx.engine.plan(&ast).unwrap();
            let scans = planned.plan.scans();
            prop_assert_eq!(scans.len(), 1);
            let scan = scans[0];
            let res = fx.engine.query(&sql).unwrap();
            prop_assert_eq!(res.rows.len(), want.len(), "{}", sql);
            let emitted = res.stats.table(&table.sql).rows_emitted as usize;
            let unfiltered = fx.engine.query(&format!("SELECT * FROM {}", table.sql)).unwrap().stats.table(&table.sql).rows_emitted as usize;
            let mediator_filters = planned.explain().lines().any(|l| l.trim_start().starts_with("Filter"));
            if !mediator_filters {
                prop_assert_eq!(emitted, want.len(), "{} [{}]", sql, BACKENDS[backend]);
            } else if scan.accepted.is_empty() {
                prop_assert_eq!(emitted, unfiltered, "{} [{}]", sql, BACKENDS[backend]);
            } else {
                prop_assert!(emitted >= want.len() && emitted <= unfiltered, "{}", sql);
            }

            // with nothing pushed, the store's output does not depend on the predicate
            let none = fx.nopush.query(&sql).unwrap();
            let all = fx.nopush.query(&format!("SELECT * FROM {}", table.sql)).unwrap();
            prop_assert_eq!(none.stats.table(&table.sql), all.stats.table(&table.sql));
        }
    }
}

#[test]
fn kv_never_accepts_filters() {
    let fx = fixture(2);
    for q in fuzz::filters(fx, 3, 40) {
        let Statement::Select(ast) = parse(&q.sql(fx)).unwrap() else { unreachable!() };
        let planned = fx.engine.plan(&ast).unwrap();
        assert!(planned.plan.scans()[0].accepted.is_empty());
    }
}

#[test]
fn docstore_accepts_simple_comparisons() {
    let fx = fixture(0);
    let mut full = 0;
    for q in fuzz::filters(fx, 4, 60) {
        let Statement::Select(ast) = parse(&q.sql(fx)).unwrap() else { unreachable!() };
        let planned = fx.engine.plan(&ast).unwrap();
        let scan = planned.plan.scans()[0];
        let mediator_filters = planned.explain().lines().any(|l| l.trim_start().starts_with("Filter"));
        full += usize::from(!scan.filters.is_empty() && !mediator_filters);
    }
    assert!(full > 10, "only {full} of 60 filters fully pushed");
}

