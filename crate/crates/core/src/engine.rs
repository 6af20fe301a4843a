//! Statement execution over a catalog: planning, running, DDL, schema
//! import and materialized views.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, MatViewDef, QualifiedName, ServerDef};
use crate::executor::{self, ExecContext, ExecError};
use crate::inference::draft_to_create;
use crate::matview::{Clock, Scheduler, SystemClock, TickReport, ViewError, ViewStore};
use crate::planner::{self, OutputColumn, PlanError, PlannedQuery, PlannerConfig};
use crate::relmodel::{ColumnDef, Row, ScalarType};
use crate::sqlfront::{self, CreateForeignTable, ObjectName, ParseError, Query, Statement};
use crate::stores::{wrapper_for, StoreError};
use crate::wrapper::{StatsSnapshot, Wrapper};

pub const CATALOG_FILE: &str = "catalog.json";
pub const VIEWS_DIR: &str = "views";

/// Rows sampled per collection by IMPORT FOREIGN SCHEMA unless overridden
/// with the `sample` option.
pub const DEFAULT_SAMPLE: usize = 100;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Failures of the engine's own files rather than of the request.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Catalog(CatalogError::Io { .. }) | Error::View(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub columns: Vec<OutputColumn>,
    pub rows: Vec<Row>,
    pub stats: StatsSnapshot,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Rows(QueryResult),
    Explain(String),
    /// Completion message of a statement that returns no rows.
    Done(String),
}

#[derive(Debug, Clone)]
pub struct ImportResult {
    pub statements: Vec<CreateForeignTable>,
    pub failures: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct RefreshReport {
    pub rows: usize,
    pub duration: Duration,
}

pub struct Engine {
    catalog: RwLock<Catalog>,
    state_dir: Option<PathBuf>,
    wrappers: Mutex<HashMap<String, Arc<dyn Wrapper>>>,
    config: PlannerConfig,
    views: Arc<ViewStore>,
    clock: Arc<dyn Clock>,
    scheduler: Mutex<Scheduler>,
    tick: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Engine {
    /// An engine whose catalog and views live only in memory.
    pub fn new(catalog: Catalog) -> Self {
        Engine::build(catalog, None, Arc::new(SystemClock))
    }

    /// Opens (or initializes) the state directory holding the catalog and
    /// persisted view snapshots.
    pub fn open(state_dir: &Path) -> Result<Self> {
        Engine::open_with_clock(state_dir, Arc::new(SystemClock))
    }

    pub fn open_with_clock(state_dir: &Path, clock: Arc<dyn Clock>) -> Result<Self> {
        let path = state_dir.join(CATALOG_FILE);
        let catalog = if path.exists() { Catalog::load(&path)? } else { Catalog::new() };
        let engine = Engine::build(catalog, Some(state_dir.to_path_buf()), clock);
        let views: Vec<MatViewDef> = engine.catalog().views().cloned().collect();
        for v in views {
            engine.views.load(&v.name, &v.columns)?;
        }
        Ok(engine)
    }

    fn build(catalog: Catalog, state_dir: Option<PathBuf>, clock: Arc<dyn Clock>) -> Self {
        let views = Arc::new(ViewStore::new(state_dir.as_ref().map(|d| d.join(VIEWS_DIR))));
        let now = clock.now();
        let mut scheduler = Scheduler::default();
        for v in catalog.views() {
            if let Some(iv) = v.refresh_every_secs {
                scheduler.register(v.name.clone(), iv, v.last_refreshed.map_or(now, |t| t + iv as i64));
            }
        }
        Engine {
            catalog: RwLock::new(catalog),
            state_dir,
            wrappers: Mutex::new(HashMap::new()),
            config: PlannerConfig::default(),
            views,
            clock,
            scheduler: Mutex::new(scheduler),
            tick: Mutex::new(()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_config(mut self, config: PlannerConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: PlannerConfig) {
        self.config = config;
    }

    pub fn state_dir(&self) -> Option<&Path> {
        self.state_dir.as_deref()
    }

    pub fn catalog(&self) -> RwLockReadGuard<'_, Catalog> {
        self.catalog.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn views(&self) -> Arc<ViewStore> {
        self.views.clone()
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    /// Applies `f` to the catalog and persists the result; on error the
    /// catalog is left unchanged.
    pub fn update_catalog<T>(&self, f: impl FnOnce(&mut Catalog) -> Result<T, CatalogError>) -> Result<T> {
        let mut guard = self.catalog.write().unwrap_or_else(|p| p.into_inner());
        let mut next = guard.clone();
        let out = f(&mut next)?;
        if let Some(dir) = &self.state_dir {
            next.save(&dir.join(CATALOG_FILE))?;
        }
        *guard = next;
        Ok(out)
    }

    pub fn add_server(&self, server: ServerDef) -> Result<()> {
        let name = server.name.clone();
        self.update_catalog(|c| c.add_server(server))?;
        lock(&self.wrappers).remove(&name);
        Ok(())
    }

    pub fn wrapper(&self, server: &str) -> Result<Arc<dyn Wrapper>, PlanError> {
        let catalog = self.catalog();
        self.wrapper_in(&catalog, server)
    }

    fn wrapper_in(&self, catalog: &Catalog, server: &str) -> Result<Arc<dyn Wrapper>, PlanError> {
        if let Some(w) = lock(&self.wrappers).get(server) {
            return Ok(w.clone());
        }
        let w = wrapper_for(catalog.server(server)?)?;
        lock(&self.wrappers).insert(server.to_string(), w.clone());
        Ok(w)
    }

    pub fn plan(&self, q: &Query) -> Result<PlannedQuery> {
        let catalog = self.catalog();
        let lookup = |s: &str| self.wrapper_in(&catalog, s);
        Ok(planner::plan_query(q, &catalog, &lookup, &self.config)?)
    }

    pub fn run(&self, q: &Query) -> Result<QueryResult> {
        let planned = self.plan(q)?;
        let ctx = ExecContext::new(self.views.clone());
        let rows = executor::collect(&planned.plan, &ctx)?;
        Ok(QueryResult {
            columns: planned.columns,
            rows,
            stats: ctx.stats.snapshot(),
        })
    }

    /// Runs a single SELECT.
    pub fn query(&self, sql: &str) -> Result<QueryResult> {
        match sqlfront::parse(sql)? {
            Statement::Select(q) => self.run(&q),
            _ => Err(Error::Invalid("expected a SELECT statement".into())),
        }
    }

    /// EXPLAIN text of a SELECT (with or without the EXPLAIN keyword).
    pub fn explain(&self, sql: &str) -> Result<String> {
        match sqlfront::parse(sql)? {
            Statement::Select(q) | Statement::Explain(q) => Ok(self.plan(&q)?.explain()),
            _ => Err(Error::Invalid("only queries can be explained".into())),
        }
    }

    /// Executes every statement of a script, stopping at the first error.
    pub fn execute_script(&self, sql: &str) -> Result<Vec<Outcome>> {
        sqlfront::parse_statements(sql)?.iter().map(|s| self.execute_statement(s)).collect()
    }

    pub fn execute(&self, sql: &str) -> Result<Outcome> {
        self.execute_statement(&sqlfront::parse(sql)?)
    }

    pub fn execute_statement(&self, stmt: &Statement) -> Result<Outcome> {
        match stmt {
            Statement::Select(q) => Ok(Outcome::Rows(self.run(q)?)),
            Statement::Explain(q) => Ok(Outcome::Explain(self.plan(q)?.explain())),
            Statement::CreateForeignTable(_) | Statement::AlterForeignTable(_) | Statement::DropForeignTable(_) => {
                Ok(Outcome::Done(self.update_catalog(|c| c.apply_ddl(stmt))?))
            }
            Statement::ImportForeignSchema(i) => {
                let sample = match i.options.get("sample") {
                    Some(s) => s.parse().map_err(|_| Error::Invalid(format!("invalid sample size {s}")))?,
                    None => DEFAULT_SAMPLE,
                };
                let res = self.import_schema(&i.server, &i.into, sample, true)?;
                let mut msg = format!("IMPORT FOREIGN SCHEMA {} ({} tables)", i.into, res.statements.len());
                for (obj, why) in &res.failures {
                    msg.push_str(&format!("\nskipped {obj}: {why}"));
                }
                Ok(Outcome::Done(msg))
            }
            Statement::CreateMaterializedView {
                name,
                query,
                refresh_every_secs,
            } => {
                let n = self.create_view(name, query, *refresh_every_secs)?;
                Ok(Outcome::Done(format!("CREATE MATERIALIZED VIEW {} ({n} rows)", QualifiedName::resolve(name))))
            }
            Statement::RefreshMaterializedView(name) => {
                let q = QualifiedName::resolve(name);
                let r = self.refresh_view(&q)?;
                Ok(Outcome::Done(format!("REFRESH MATERIALIZED VIEW {q} ({} rows)", r.rows)))
            }
            Statement::DropMaterializedView(name) => {
                let q = QualifiedName::resolve(name);
                self.drop_view(&q)?;
                Ok(Outcome::Done(format!("DROP MATERIALIZED VIEW {q}")))
            }
        }
    }

    /// Infers table definitions for every object of `server`; with `apply`
    /// they are created in schema `into`. Objects whose table cannot be
    /// created are reported as failures.
    pub fn import_schema(&self, server: &str, into: &str, sample: usize, apply: bool) -> Result<ImportResult> {
        let wrapper = self.wrapper(server)?;
        let report = wrapper.import_schema(sample)?;
        let mut statements = Vec::new();
        let mut failures = report.failures;
        for d in &report.tables {
            let stmt = draft_to_create(d, into, server);
            if apply {
                if let Err(e) = self.update_catalog(|c| c.apply_ddl(&Statement::CreateForeignTable(stmt.clone()))) {
                    failures.push((d.name.clone(), e.to_string()));
                    continue;
                }
            }
            statements.push(stmt);
        }
        Ok(ImportResult { statements, failures })
    }

    /// Plans and runs `query`, stores its rows and registers the refresh
    /// job. Nothing is stored if the query fails.
    pub fn create_view(&self, name: &ObjectName, query: &Query, refresh_every_secs: Option<u64>) -> Result<usize> {
        let q = QualifiedName::resolve(name);
        if refresh_every_secs == Some(0) {
            return Err(Error::Invalid("refresh interval must be at least 1 second".into()));
        }
        let planned = self.plan(query)?;
        let mut columns: Vec<ColumnDef> = Vec::new();
        for c in &planned.columns {
            if columns.iter().any(|x| x.name == c.name) {
                return Err(Error::Invalid(format!("column {} specified more than once in view {q}", c.name)));
            }
            columns.push(ColumnDef::new(c.name.clone(), c.ty.unwrap_or(ScalarType::Text)));
        }
        let mut depends_on = planned.relations.clone();
        depends_on.sort();
        depends_on.dedup();
        let ctx = ExecContext::new(self.views.clone());
        let rows = executor::collect(&planned.plan, &ctx)?;
        let n = rows.len();
        let now = self.clock.now();
        let def = MatViewDef {
            name: q.clone(),
            query: sqlfront::render::query(query),
            columns,
            refresh_every_secs,
            depends_on,
            last_refreshed: Some(now),
        };
        let view = q.clone();
        self.update_catalog(move |c| c.add_view(def))?;
        if let Err(e) = self.views.install(&view, rows, now) {
            let _ = self.update_catalog(|c| c.remove_view(&view));
            return Err(e.into());
        }
        if let Some(iv) = refresh_every_secs {
            lock(&self.scheduler).register(view, iv, now + iv as i64);
        }
        Ok(n)
    }

    pub fn refresh_view(&self, name: &QualifiedName) -> Result<RefreshReport> {
        self.refresh_at(name, self.clock.now())
    }

    /// Re-executes the view query and swaps the snapshot in; on failure the
    /// previous snapshot stays visible.
    fn refresh_at(&self, name: &QualifiedName, now: i64) -> Result<RefreshReport> {
        let def = self
            .catalog()
            .view(name)
            .cloned()
            .ok_or_else(|| Error::Catalog(CatalogError::UnknownRelation(name.to_string())))?;
        let writer = self.views.writer(name);
        let _guard = lock(&writer);
        let start = Instant::now();
        let Statement::Select(q) = sqlfront::parse(&def.query)? else {
            return Err(Error::Invalid(format!("view {name} has a non-query definition")));
        };
        let res = self.run(&q)?;
        if res.columns.len() != def.columns.len() {
            return Err(Error::Invalid(format!(
                "view {name} query now yields {} columns, expected {}",
                res.columns.len(),
                def.columns.len()
            )));
        }
        let rows = res.rows.len();
        self.views.install(name, res.rows, now)?;
        self.update_catalog(|c| {
            if let Some(v) = c.view_mut(name) {
                v.last_refreshed = Some(now);
            }
            Ok(())
        })?;
        Ok(RefreshReport {
            rows,
            duration: start.elapsed(),
        })
    }

    pub fn drop_view(&self, name: &QualifiedName) -> Result<()> {
        self.update_catalog(|c| c.remove_view(name))?;
        lock(&self.scheduler).unregister(name);
        self.views.remove(name);
        Ok(())
    }

    /// Refreshes every view whose job is due at `now` and advances its
    /// schedule, whether or not the refresh succeeded.
    pub fn scheduler_tick(&self, now: i64) -> TickReport {
        let _serial = lock(&self.tick);
        let due = lock(&self.scheduler).due(now);
        let mut report = TickReport::default();
        for v in due {
            match self.refresh_at(&v, now) {
                Ok(_) => report.refreshed.push(v.to_string()),
                Err(e) => report.failures.push((v.to_string(), e.to_string())),
            }
            lock(&self.scheduler).advance(&v, now);
        }
        report.refreshed.sort();
        report
    }

    /// Next due time of a view's refresh job.
    pub fn next_due(&self, name: &QualifiedName) -> Option<i64> {
        lock(&self.scheduler).job(name).map(|j| j.next_due)
    }
}
