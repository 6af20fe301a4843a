//! Contract between the mediator and store adapters: capability flags,
//! scan negotiation, cursors and per-query transfer statistics.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::accum::AggFunc;
use crate::catalog::{ForeignTableDef, StoreKind};
use crate::keyexpr::CompositeKeySpec;
use crate::relmodel::{compare, ColumnDef, Options, Row, Value};
use crate::stores::pipeline::Stage;
use crate::stores::StoreError;

/// What a store can evaluate natively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub filter_eq_on_key: bool,
    pub filter_general: bool,
    pub projection: bool,
    pub sort: bool,
    pub group_aggregate: bool,
    pub limit: bool,
    pub native_fragment: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        filter_eq_on_key: true,
        filter_general: true,
        projection: true,
        sort: true,
        group_aggregate: true,
        limit: true,
        native_fragment: true,
    };

    pub const NONE: Capabilities = Capabilities {
        filter_eq_on_key: false,
        filter_general: false,
        projection: false,
        sort: false,
        group_aggregate: false,
        limit: false,
        native_fragment: false,
    };

    pub fn intersect(self, o: Capabilities) -> Capabilities {
        Capabilities {
            filter_eq_on_key: self.filter_eq_on_key && o.filter_eq_on_key,
            filter_general: self.filter_general && o.filter_general,
            projection: self.projection && o.projection,
            sort: self.sort && o.sort,
            group_aggregate: self.group_aggregate && o.group_aggregate,
            limit: self.limit && o.limit,
            native_fragment: self.native_fragment && o.native_fragment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    In,
}

impl FilterOp {
    pub fn symbol(self) -> &'static str {
        match self {
            FilterOp::Eq => "=",
            FilterOp::NotEq => "<>",
            FilterOp::Lt => "<",
            FilterOp::LtEq => "<=",
            FilterOp::Gt => ">",
            FilterOp::GtEq => ">=",
            FilterOp::In => "IN",
        }
    }
}

/// Right-hand side of a scan filter: a constant, or a slot filled per outer
/// row by a bind join.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Lit(Value),
    Param(usize),
}

impl Operand {
    pub fn bind<'a>(&'a self, params: &'a [Value]) -> &'a Value {
        match self {
            Operand::Lit(v) => v,
            Operand::Param(i) => params.get(*i).unwrap_or(&Value::Null),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Lit(v) => write!(f, "{v}"),
            Operand::Param(i) => write!(f, "${}", i + 1),
        }
    }
}

/// `column op value` (or `column IN (values)`) over a table column index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFilter {
    pub column: usize,
    pub op: FilterOp,
    pub values: Vec<Operand>,
}

impl ScanFilter {
    /// SQL semantics: unknown (any Null) counts as false.
    pub fn holds(&self, v: &Value, params: &[Value]) -> bool {
        let test = |rhs: &Value, op: FilterOp| -> bool {
            let Some(o) = compare(v, rhs) else { return false };
            match op {
                FilterOp::Eq | FilterOp::In => o == Ordering::Equal,
                FilterOp::NotEq => o != Ordering::Equal,
                FilterOp::Lt => o == Ordering::Less,
                FilterOp::LtEq => o != Ordering::Greater,
                FilterOp::Gt => o == Ordering::Greater,
                FilterOp::GtEq => o != Ordering::Less,
            }
        };
        self.values.iter().any(|rhs| test(rhs.bind(params), self.op))
    }

    pub fn render(&self, columns: &[ColumnDef]) -> String {
        let col = &columns[self.column].name;
        if self.op == FilterOp::In {
            let vals: Vec<String> = self.values.iter().map(Operand::to_string).collect();
            format!("{col} IN ({})", vals.join(", "))
        } else {
            format!("{col} {} {}", self.op.symbol(), self.values[0])
        }
    }
}

/// Aggregation offered to a wrapper: group-by columns and aggregate calls
/// over table columns. Output rows are `[groups..., aggregates...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRequest {
    pub group: Vec<usize>,
    pub aggs: Vec<(AggFunc, Option<usize>)>,
}

#[derive(Debug, Clone)]
pub struct ScanRequest {
    pub table: ForeignTableDef,
    /// Column indices needed above the scan.
    pub required: Vec<usize>,
    /// Conjuncts; the wrapper accepts each one whole or not at all.
    pub filters: Vec<ScanFilter>,
    pub sort: Vec<(usize, bool)>,
    pub limit: Option<u64>,
    pub aggregate: Option<AggRequest>,
}

impl ScanRequest {
    pub fn new(table: ForeignTableDef) -> Self {
        ScanRequest {
            table,
            required: Vec::new(),
            filters: Vec::new(),
            sort: Vec::new(),
            limit: None,
            aggregate: None,
        }
    }
}

/// Shape of the rows a cursor yields.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputLayout {
    /// One value per table column (columns not required are Null).
    Columns,
    /// A single column holding the raw store document; the listed arrays
    /// still have to be unnested by the mediator.
    RawDocument { unwinds: Vec<String> },
    /// `[groups..., aggregates...]` of an accepted aggregate request.
    Aggregated,
}

/// How a wide-column point lookup obtains its key.
#[derive(Debug, Clone, PartialEq)]
pub enum KeySource {
    Direct(Operand),
    Composite { spec: CompositeKeySpec, bindings: Vec<(String, Operand)> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NativeQuery {
    Pipeline { collection: String, stages: Vec<Stage> },
    KeyLookup { cf: String, key: KeySource },
    CfScan { cf: String },
    KvScan { namespace: String },
}

#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub table: ForeignTableDef,
    pub required: Vec<usize>,
    pub filters: Vec<ScanFilter>,
    pub sort: Vec<(usize, bool)>,
    pub limit: Option<u64>,
    pub aggregate: Option<AggRequest>,
    /// Indices into `filters` evaluated by the store.
    pub accepted: Vec<usize>,
    /// Indices into `filters` left to the mediator.
    pub residual: Vec<usize>,
    /// Only `required` columns are filled in when set.
    pub projection_accepted: bool,
    pub sort_accepted: bool,
    pub limit_accepted: bool,
    pub aggregate_accepted: bool,
    pub native_text: String,
    pub est_rows: f64,
    pub layout: OutputLayout,
    pub native: NativeQuery,
}

impl ScanPlan {
    /// A plan that pushes nothing; used as the starting point by wrappers.
    pub fn unpushed(req: &ScanRequest, native: NativeQuery, native_text: String, est_rows: f64) -> Self {
        ScanPlan {
            table: req.table.clone(),
            required: req.required.clone(),
            filters: req.filters.clone(),
            sort: req.sort.clone(),
            limit: req.limit,
            aggregate: req.aggregate.clone(),
            accepted: Vec::new(),
            residual: (0..req.filters.len()).collect(),
            projection_accepted: false,
            sort_accepted: false,
            limit_accepted: false,
            aggregate_accepted: false,
            native_text,
            est_rows,
            layout: OutputLayout::Columns,
            native,
        }
    }

    pub fn set_accepted(&mut self, accepted: Vec<usize>) {
        self.residual = (0..self.filters.len()).filter(|i| !accepted.contains(i)).collect();
        self.accepted = accepted;
    }

    pub fn residual_filters(&self) -> impl Iterator<Item = &ScanFilter> {
        self.residual.iter().map(|i| &self.filters[*i])
    }
}

/// Transfer counters for one table within one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TableStats {
    pub point_gets: u64,
    pub scans: u64,
    pub rows_emitted: u64,
}

impl std::ops::AddAssign for TableStats {
    fn add_assign(&mut self, o: TableStats) {
        self.point_gets += o.point_gets;
        self.scans += o.scans;
        self.rows_emitted += o.rows_emitted;
    }
}

/// Shared, per-query collector; cloned into every cursor.
#[derive(Debug, Clone, Default)]
pub struct Stats(Arc<Mutex<BTreeMap<String, TableStats>>>);

impl Stats {
    pub fn new() -> Self {
        Stats::default()
    }

    pub fn record(&self, table: &str, f: impl FnOnce(&mut TableStats)) {
        let mut m = self.0.lock().unwrap_or_else(|p| p.into_inner());
        f(m.entry(table.to_string()).or_default());
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            tables: self.0.lock().unwrap_or_else(|p| p.into_inner()).clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatsSnapshot {
    pub tables: BTreeMap<String, TableStats>,
}

impl StatsSnapshot {
    pub fn table(&self, name: &str) -> TableStats {
        self.tables.get(name).copied().unwrap_or_default()
    }

    pub fn total(&self) -> TableStats {
        let mut t = TableStats::default();
        for s in self.tables.values() {
            t += *s;
        }
        t
    }
}

/// Single-consumer row iterator over a store result.
pub trait Cursor: Send {
    fn next(&mut self) -> Result<Option<Row>, StoreError>;
}

/// Cursor over rows already fetched from the store; counts each row handed
/// to the mediator.
pub struct VecCursor {
    rows: std::vec::IntoIter<Row>,
    table: String,
    stats: Stats,
}

impl VecCursor {
    pub fn new(rows: Vec<Row>, table: String, stats: Stats) -> Self {
        VecCursor {
            rows: rows.into_iter(),
            table,
            stats,
        }
    }
}

impl Cursor for VecCursor {
    fn next(&mut self) -> Result<Option<Row>, StoreError> {
        let r = self.rows.next();
        if r.is_some() {
            self.stats.record(&self.table, |s| s.rows_emitted += 1);
        }
        Ok(r)
    }
}

/// Table definition produced by schema import, before it is named into a
/// schema and bound to a server.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDraft {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub options: Options,
}

#[derive(Debug, Default)]
pub struct ImportReport {
    pub tables: Vec<TableDraft>,
    /// Store objects that could not be imported, with the reason.
    pub failures: Vec<(String, String)>,
}

pub trait Wrapper: Send + Sync {
    fn kind(&self) -> StoreKind;

    fn capabilities(&self) -> Capabilities;

    /// Splits the request into native and residual parts. `caps` is the
    /// effective capability set (the wrapper's own, possibly masked).
    fn plan_scan(&self, req: &ScanRequest, caps: Capabilities) -> Result<ScanPlan, StoreError>;

    fn open(&self, plan: &ScanPlan, params: &[Value], stats: &Stats) -> Result<Box<dyn Cursor>, StoreError>;

    fn import_schema(&self, sample: usize) -> Result<ImportReport, StoreError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_semantics() {
        let f = ScanFilter { column: 0, op: FilterOp::GtEq, values: vec![Operand::Param(0)] };
        assert!(f.holds(&Value::Int(5), &[Value::Int(5)]));
        assert!(!f.holds(&Value::Null, &[Value::Int(5)]));
        let f = ScanFilter {
            column: 0,
            op: FilterOp::In,
            values: vec![Operand::Lit(Value::Int(1)), Operand::Lit(Value::Int(3))],
        };
        assert!(f.holds(&Value::Int(3), &[]));
        assert!(!f.holds(&Value::Int(2), &[]));
    }

    #[test]
    fn stats_accumulate() {
        let s = Stats::new();
        s.record("t", |t| t.scans += 1);
        s.record("t", |t| t.rows_emitted += 3);
        s.record("u", |t| t.point_gets += 1);
        let snap = s.snapshot();
        assert_eq!(snap.table("t"), TableStats { point_gets: 0, scans: 1, rows_emitted: 3 });
        assert_eq!(snap.total().point_gets, 1);
        assert_eq!(Capabilities::ALL.intersect(Capabilities::NONE), Capabilities::NONE);
    }
}
