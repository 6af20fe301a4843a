//! Materialized view snapshots and the tick-driven refresh scheduler.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::QualifiedName;
use crate::executor::ViewSource;
use crate::relmodel::{coerce, ColumnDef, Row, Value};
use crate::stores::write_atomic;

/// Source of "now" in whole seconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now(&self) -> i64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64)
    }
}

/// Virtual time for tests and simulations.
#[derive(Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(now: i64) -> Self {
        ManualClock(AtomicI64::new(now))
    }

    pub fn set(&self, now: i64) {
        self.0.store(now, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewError {
    #[error("view file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct ViewFile {
    name: String,
    refreshed_at: i64,
    rows: Vec<Row>,
}

/// Current rows of every materialized view. Readers clone an `Arc` and keep
/// iterating it even if a refresh installs a newer snapshot meanwhile.
pub struct ViewStore {
    dir: Option<PathBuf>,
    snapshots: RwLock<HashMap<QualifiedName, Arc<Vec<Row>>>>,
    writers: Mutex<HashMap<QualifiedName, Arc<Mutex<()>>>>,
}

impl ViewStore {
    /// `dir` is where snapshots persist; `None` keeps them in memory only.
    pub fn new(dir: Option<PathBuf>) -> Self {
        ViewStore {
            dir,
            snapshots: RwLock::new(HashMap::new()),
            writers: Mutex::new(HashMap::new()),
        }
    }

    fn path(&self, name: &QualifiedName) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{name}.json")))
    }

    pub fn get(&self, name: &QualifiedName) -> Option<Arc<Vec<Row>>> {
        self.snapshots.read().unwrap_or_else(|p| p.into_inner()).get(name).cloned()
    }

    /// Serializes refreshes of one view.
    pub fn writer(&self, name: &QualifiedName) -> Arc<Mutex<()>> {
        self.writers
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .entry(name.clone())
            .or_default()
            .clone()
    }

    /// Persists `rows` and then makes them the visible snapshot.
    pub fn install(&self, name: &QualifiedName, rows: Vec<Row>, refreshed_at: i64) -> Result<Arc<Vec<Row>>, ViewError> {
        if let Some(path) = self.path(name) {
            let file = ViewFile {
                name: name.to_string(),
                refreshed_at,
                rows,
            };
            let text = serde_json::to_string(&file).expect("rows serialize");
            write_atomic(&path, text.as_bytes()).map_err(|e| ViewError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            return Ok(self.publish(name, file.rows));
        }
        Ok(self.publish(name, rows))
    }

    fn publish(&self, name: &QualifiedName, rows: Vec<Row>) -> Arc<Vec<Row>> {
        let rows = Arc::new(rows);
        self.snapshots.write().unwrap_or_else(|p| p.into_inner()).insert(name.clone(), rows.clone());
        rows
    }

    /// Loads a persisted snapshot, coercing values back to the column types.
    /// A missing file leaves the view unpopulated.
    pub fn load(&self, name: &QualifiedName, columns: &[ColumnDef]) -> Result<Option<i64>, ViewError> {
        let Some(path) = self.path(name) else { return Ok(None) };
        if !path.exists() {
            return Ok(None);
        }
        let err = |message: String| ViewError::Io {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
        let file: ViewFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let mut rows = Vec::with_capacity(file.rows.len());
        for r in file.rows {
            if r.len() != columns.len() {
                return Err(err(format!("row has {} values, view has {} columns", r.len(), columns.len())));
            }
            let vals: Result<Vec<Value>, _> = r.values().iter().zip(columns).map(|(v, c)| coerce(v, c.ty)).collect();
            rows.push(Row::new(vals.map_err(|e| err(e.to_string()))?));
        }
        self.publish(name, rows);
        Ok(Some(file.refreshed_at))
    }

    pub fn remove(&self, name: &QualifiedName) {
        self.snapshots.write().unwrap_or_else(|p| p.into_inner()).remove(name);
        if let Some(path) = self.path(name) {
            let _ = fs::remove_file(path);
        }
    }
}

impl ViewSource for ViewStore {
    fn rows(&self, name: &QualifiedName) -> Option<Arc<Vec<Row>>> {
        self.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefreshJob {
    pub view: QualifiedName,
    pub interval_secs: u64,
    pub next_due: i64,
}

/// First instant strictly after `now` on the grid `due + k * interval`, or
/// `due` itself when it is still in the future.
pub fn next_due_after(due: i64, interval_secs: u64, now: i64) -> i64 {
    let iv = interval_secs.max(1) as i64;
    if due > now {
        return due;
    }
    due + ((now - due) / iv + 1) * iv
}

#[derive(Debug, Default)]
pub struct Scheduler {
    jobs: BTreeMap<QualifiedName, RefreshJob>,
}

impl Scheduler {
    pub fn register(&mut self, view: QualifiedName, interval_secs: u64, next_due: i64) {
        let interval_secs = interval_secs.max(1);
        self.jobs.insert(
            view.clone(),
            RefreshJob {
                view,
                interval_secs,
                next_due,
            },
        );
    }

    pub fn unregister(&mut self, view: &QualifiedName) {
        self.jobs.remove(view);
    }

    pub fn job(&self, view: &QualifiedName) -> Option<&RefreshJob> {
        self.jobs.get(view)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &RefreshJob> {
        self.jobs.values()
    }

    /// Views whose job is due at `now`, in name order.
    pub fn due(&self, now: i64) -> Vec<QualifiedName> {
        self.jobs.values().filter(|j| j.next_due <= now).map(|j| j.view.clone()).collect()
    }

    pub fn advance(&mut self, view: &QualifiedName, now: i64) {
        if let Some(j) = self.jobs.get_mut(view) {
            j.next_due = next_due_after(j.next_due, j.interval_secs, now);
        }
    }
}

/// Outcome of one scheduler tick.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct TickReport {
    /// Successfully refreshed views, sorted.
    pub refreshed: Vec<String>,
    pub failures: Vec<(String, String)>,
}
