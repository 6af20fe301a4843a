//! `polyqe`: register stores, load data, import schemas and query them.

mod bench;
mod config;
mod output;
mod repl;

use std::io::{self, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use polyqe::catalog::{QualifiedName, ServerDef, StoreKind};
use polyqe::engine::{Engine, DEFAULT_SAMPLE};
use polyqe::planner::PlannerConfig;
use polyqe::sqlfront::render;
use polyqe::stores::load_object;
use polyqe::tpcc::{Backend, ExecMode};

use config::{ensure_dir, CliConfig, OutputMode, Overrides};

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<polyqe::engine::Error> for CliError {
    fn from(e: polyqe::engine::Error) -> Self {
        if e.is_internal() {
            CliError::Internal(e.to_string())
        } else {
            CliError::User(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "polyqe", version, about = "Query document, wide-column and key-value stores with SQL")]
struct Cli {
    /// TOML file with state_dir, data_dir, output and bind_join_threshold.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory holding the catalog and view snapshots [default: $POLYQE_HOME or .polyqe].
    #[arg(long, global = true, value_name = "DIR")]
    state: Option<PathBuf>,
    /// Parent directory for server data when `server add` has no --data.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Tab-separated output without padding.
    #[arg(long, global = true)]
    tsv: bool,
    #[arg(long, global = true, value_name = "ROWS")]
    bind_join_threshold: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Manage registered stores.
    Server {
        #[command(subcommand)]
        cmd: ServerCmd,
    },
    /// Install a JSON-lines collection or CSV column family / namespace.
    Load { server: String, object: String, file: PathBuf },
    /// Print CREATE FOREIGN TABLE statements inferred from sampled data.
    ImportSchema {
        server: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLE)]
        sample: usize,
        /// Add the tables to the catalog as well.
        #[arg(long)]
        apply: bool,
        /// Target schema [default: the server kind's schema].
        #[arg(long)]
        into: Option<String>,
    },
    /// Run statements from -c, or read them interactively.
    Sql {
        #[arg(short = 'c', value_name = "SQL")]
        command: Option<String>,
    },
    /// Show the plan of a query.
    Explain {
        #[arg(short = 'c', value_name = "SQL")]
        command: String,
    },
    /// Materialized view maintenance.
    View {
        #[command(subcommand)]
        cmd: ViewCmd,
    },
    /// Periodic view refresh.
    Scheduler {
        #[command(subcommand)]
        cmd: SchedulerCmd,
    },
    /// Workload benchmarks.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
}

#[derive(Subcommand)]
enum ServerCmd {
    Add {
        name: String,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    List,
}

#[derive(Subcommand)]
enum ViewCmd {
    Refresh { name: String },
}

#[derive(Subcommand)]
enum SchedulerCmd {
    Run {
        /// Stop after this many ticks.
        #[arg(long, conflicts_with = "forever")]
        ticks: Option<u64>,
        #[arg(long)]
        forever: bool,
        /// Read SQL from stdin while the scheduler runs in the background.
        #[arg(long, requires = "forever")]
        with_repl: bool,
        /// Seconds between ticks.
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    Tpcc {
        #[arg(long, value_enum)]
        backend: BenchBackend,
        #[arg(long, default_value_t = 1)]
        warehouses: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        transactions: usize,
        /// Run transactions one at a time instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
        /// Compare every result with the in-memory oracle.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Docstore,
    Widecolumn,
    Kv,
}

impl From<Kind> for StoreKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Docstore => StoreKind::Docstore,
            Kind::Widecolumn => StoreKind::Widecolumn,
            Kind::Kv => StoreKind::Kv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchBackend {
    Docstore,
    Widecolumn,
}

fn open(cfg: &CliConfig) -> Result<Engine, CliError> {
    ensure_dir(&cfg.state_dir)?;
    let engine = Engine::open(&cfg.state_dir)?;
    Ok(match cfg.bind_join_threshold {
        Some(t) => engine.with_config(PlannerConfig { bind_join_threshold: t, ..PlannerConfig::default() }),
        None => engine,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = CliConfig::resolve(Overrides {
        config: cli.config,
        state_dir: cli.state,
        data_dir: cli.data_dir,
        output: cli.tsv.then_some(OutputMode::Tsv),
        bind_join_threshold: cli.bind_join_threshold,
    })?;
    let mode = cfg.output;
    match cli.cmd {
        Cmd::Server { cmd: ServerCmd::Add { name, kind, data } } => {
            let engine = open(&cfg)?;
            let dir = ensure_dir(&data.unwrap_or_else(|| cfg.data_dir.join(&name)))?;
            let kind = StoreKind::from(kind);
            engine.add_server(ServerDef::new(&name, kind, &dir.display().to_string()))?;
            println!("server {name} ({}) at {}", kind.name(), dir.display());
        }
        Cmd::Server { cmd: ServerCmd::List } => {
            let engine = open(&cfg)?;
            for s in engine.catalog().servers() {
                println!("{}\t{}\t{}", s.name, s.kind.name(), s.data_dir().unwrap_or(""));
            }
        }
        Cmd::Load { server, object, file } => {
            let engine = open(&cfg)?;
            let def = engine.catalog().server(&server).map_err(|e| CliError::User(e.to_string()))?.clone();
            let dir = ensure_dir(&PathBuf::from(def.data_dir().unwrap_or(".")))?;
            let n = load_object(&dir, def.kind, &object, &file).map_err(|e| CliError::User(e.to_string()))?;
            println!("loaded {n} records into {server}/{object}");
        }
        Cmd::ImportSchema { server, sample, apply, into } => {
            let engine = open(&cfg)?;
            let kind = engine.catalog().server(&server).map_err(|e| CliError::User(e.to_string()))?.kind;
            let into = into.unwrap_or_else(|| kind.default_schema().to_string());
            let r = engine.import_schema(&server, &into, sample, apply)?;
            for s in &r.statements {
                println!("{};", render::create_foreign_table(s));
            }
            for (name, why) in &r.failures {
                eprintln!("skipped {name}: {why}");
            }
            if apply {
                eprintln!("created {} tables in schema {into}", r.statements.len());
            }
        }
        Cmd::Sql { command: Some(sql) } => repl::run_script(&open(&cfg)?, &sql, mode)?,
        Cmd::Sql { command: None } => {
            let engine = open(&cfg)?;
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            repl::run(&engine, stdin.lock(), mode, prompt);
        }
        Cmd::Explain { command } => println!("{}", open(&cfg)?.explain(&command)?),
        Cmd::View { cmd: ViewCmd::Refresh { name } } => {
            let r = open(&cfg)?.refresh_view(&QualifiedName::parse(&name))?;
            println!("refreshed {name}: {} rows in {} ms", r.rows, r.duration.as_millis());
        }
        Cmd::Scheduler { cmd: SchedulerCmd::Run { ticks, forever, with_repl, interval } } => {
            if !(interval.is_finite() && interval >= 0.0) {
                return Err(CliError::User("--interval must be a non-negative number of seconds".into()));
            }
            let engine = Arc::new(open(&cfg)?);
            let pause = Duration::from_secs_f64(interval);
            let limit = if forever { None } else { Some(ticks.unwrap_or(1)) };
            if with_repl {
                let stop = Arc::new(AtomicBool::new(false));
                let bg = {
                    let (engine, stop) = (engine.clone(), stop.clone());
                    std::thread::spawn(move || tick_loop(&engine, None, pause, &stop))
                };
                let stdin = io::stdin();
                let prompt = stdin.is_terminal();
                repl::run(&engine, stdin.lock(), mode, prompt);
                stop.store(true, Ordering::SeqCst);
                let _ = bg.join();
            } else if tick_loop(&engine, limit, pause, &AtomicBool::new(false)) > 0 {
                return Err(CliError::User("some view refreshes failed".into()));
            }
        }
        Cmd::Bench { cmd: BenchCmd::Tpcc { backend, warehouses, seed, transactions, sequential, check } } => {
            bench::tpcc(&bench::BenchArgs {
                backend: match backend {
                    BenchBackend::Docstore => Backend::Docstore,
                    BenchBackend::Widecolumn => Backend::Widecolumn,
                },
                warehouses,
                seed,
                transactions,
                mode: if sequential { ExecMode::Sequential } else { ExecMode::Parallel },
                check,
                bind_join_threshold: cfg.bind_join_threshold,
            })?
        }
    }
    Ok(())
}

/// Ticks until `limit` ticks have run or `stop` is set. Returns the number
/// of failed refreshes.
fn tick_loop(engine: &Engine, limit: Option<u64>, pause: Duration, stop: &AtomicBool) -> usize {
    let mut failures = 0;
    let mut n = 0;
    loop {
        let report = engine.scheduler_tick(engine.now());
        for v in &report.refreshed {
            println!("refreshed {v}");
        }
        for (v, why) in &report.failures {
            eprintln!("refresh of {v} failed: {why}");
        }
        failures += report.failures.len();
        n += 1;
        if limit.is_some_and(|l| n >= l) {
            return failures;
        }
        // sleep in short steps so a stop request is seen promptly
        let mut left = pause;
        while !left.is_zero() {
            if stop.load(Ordering::SeqCst) {
                return failures;
            }
            let step = left.min(Duration::from_millis(50));
            std::thread::sleep(step);
            left -= step;
        }
        if stop.load(Ordering::SeqCst) {
            return failures;
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            if code != 0 && !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
