use std::fmt::Write as _;
use std::time::Instant;

use polyqe::planner::PlannerConfig;
use polyqe::tpcc::{self, draw, generate, run_batch, Backend, ExecMode, Oracle, TpccParams};
use polyqe::wrapper::TableStats;

use crate::CliError;

pub struct BenchArgs {
    pub backend: Backend,
    pub warehouses: u32,
    pub seed: u64,
    pub transactions: usize,
    pub mode: ExecMode,
    pub check: bool,
    pub bind_join_threshold: Option<f64>,
}

/// Runs the workload and prints the report. A result that disagrees with
/// the oracle is an engine fault and yields an internal error.
pub fn tpcc(a: &BenchArgs) -> Result<(), CliError> {
    if a.warehouses == 0 {
        return Err(CliError::User("--warehouses must be at least 1".into()));
    }
    let data = generate(&TpccParams::new(a.warehouses, a.seed));
    let tmp = tempfile::tempdir().map_err(|e| CliError::Internal(format!("temporary directory: {e}")))?;
    let mut engine = tpcc::setup(&data, tmp.path())?;
    if let Some(t) = a.bind_join_threshold {
        engine.set_config(PlannerConfig { bind_join_threshold: t, ..PlannerConfig::default() });
    }
    let txs = draw(&data, a.seed, a.transactions);

    let start = Instant::now();
    let runs = run_batch(&engine, a.backend, &txs, a.mode);
    let elapsed = start.elapsed();

    let mut stats = TableStats::default();
    let mut failed = Vec::new();
    let mut results = Vec::new();
    for (tx, r) in txs.iter().zip(runs) {
        match r {
            Ok(run) => {
                stats += run.stats;
                results.push(Some(run.result));
            }
            Err(e) => {
                failed.push(format!("{tx:?}: {e}"));
                results.push(None);
            }
        }
    }
    let mut mismatches = Vec::new();
    if a.check {
        let oracle = Oracle::new(&data);
        for (tx, got) in txs.iter().zip(&results) {
            let want = oracle.run(tx);
            let same = matches!((got, &want), (Some(g), Some(w)) if g.bit_eq(w));
            if got.is_some() && !same {
                mismatches.push(format!("{tx:?}: got {got:?}, oracle {want:?}"));
            }
        }
    }

    let count = |k: &str| txs.iter().filter(|t| t.kind() == k).count();
    let mode = match a.mode {
        ExecMode::Sequential => "sequential",
        ExecMode::Parallel => "parallel",
    };
    let check = if !a.check {
        "skipped".to_string()
    } else if mismatches.is_empty() && failed.is_empty() {
        format!("ok ({} of {} match)", txs.len(), txs.len())
    } else {
        format!("MISMATCH ({} of {} differ)", mismatches.len() + failed.len(), txs.len())
    };
    let mut r = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(r, "{k:<16}{v}");
    };
    line("backend", a.backend.name().into());
    line("warehouses", a.warehouses.to_string());
    line("seed", a.seed.to_string());
    line("mode", mode.into());
    line("transactions", txs.len().to_string());
    line("  stock-level", count("stock-level").to_string());
    line("  order-status", count("order-status").to_string());
    line("failed", failed.len().to_string());
    line("elapsed_ms", format!("{:.1}", elapsed.as_secs_f64() * 1e3));
    line("point_gets", stats.point_gets.to_string());
    line("scans", stats.scans.to_string());
    line("rows_emitted", stats.rows_emitted.to_string());
    line("check", check);
    print!("{r}");

    for m in failed.iter().chain(&mismatches) {
        eprintln!("{m}");
    }
    if !failed.is_empty() || !mismatches.is_empty() {
        return Err(CliError::Internal(format!(
            "{} transactions failed, {} disagree with the oracle",
            failed.len(),
            mismatches.len()
        )));
    }
    Ok(())
}
