//! Wide-column wrapper: point lookups on the row key (direct or computed
//! from a composite key spec), full scans otherwise.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;

use super::{list_objects, object_path, ColumnFamily, FileCache, StoreError};
use crate::catalog::{ForeignTableDef, StoreKind};
use crate::relmodel::{coerce, ColumnDef, Options, Row, ScalarType, Value};
use crate::wrapper::{
    Capabilities, Cursor, FilterOp, ImportReport, KeySource, NativeQuery, Operand, ScanPlan, ScanRequest, Stats, TableDraft, VecCursor,
    Wrapper,
};

pub struct WideColumnWrapper {
    dir: PathBuf,
    cache: FileCache<ColumnFamily>,
}

pub const CAPABILITIES: Capabilities = Capabilities {
    filter_eq_on_key: true,
    filter_general: false,
    projection: true,
    sort: false,
    group_aggregate: false,
    limit: true,
    native_fragment: false,
};

/// Index of the column holding the row key.
fn key_column(table: &ForeignTableDef) -> Option<usize> {
    table.schema.columns().iter().position(|c| c.source_path() == "key")
}

fn sql_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl WideColumnWrapper {
    pub fn new(dir: PathBuf) -> Self {
        WideColumnWrapper {
            dir,
            cache: FileCache::default(),
        }
    }

    pub fn family(&self, name: &str) -> Result<Arc<ColumnFamily>, StoreError> {
        let path = object_path(&self.dir, StoreKind::Widecolumn, name);
        self.cache.get(&path, |p| ColumnFamily::read_csv(name, p))
    }

    /// Key lookup usable for `req`, with the filters it covers.
    fn key_source(req: &ScanRequest) -> Option<(KeySource, Vec<usize>)> {
        let table = &req.table;
        let kc = key_column(table)?;
        let single_eq = |i: usize| {
            let f = &req.filters[i];
            (f.op == FilterOp::Eq && f.values.len() == 1).then(|| f.values[0].clone())
        };
        if table.schema.columns()[kc].ty == ScalarType::Text {
            for (i, f) in req.filters.iter().enumerate() {
                if f.column == kc {
                    if let Some(op) = single_eq(i) {
                        return Some((KeySource::Direct(op), vec![i]));
                    }
                }
            }
        }
        let (at, spec) = table.composite_key()?;
        if at != kc {
            return None;
        }
        let mut bindings = Vec::new();
        let mut used = Vec::new();
        for col in &spec.columns {
            let ci = table.schema.index_of(col)?;
            let i = (0..req.filters.len()).find(|&i| req.filters[i].column == ci && single_eq(i).is_some())?;
            bindings.push((col.clone(), req.filters[i].values[0].clone()));
            used.push(i);
        }
        used.sort_unstable();
        used.dedup();
        Some((KeySource::Composite { spec, bindings }, used))
    }

    fn render_key(key: &KeySource, params: Option<&[Value]>) -> Result<Option<String>, StoreError> {
        let val = |o: &Operand| -> Option<Value> {
            match (o, params) {
                (Operand::Lit(v), _) => Some(v.clone()),
                (Operand::Param(i), Some(p)) => Some(p.get(*i).cloned().unwrap_or(Value::Null)),
                (Operand::Param(_), None) => None,
            }
        };
        match key {
            KeySource::Direct(o) => Ok(val(o).map(|v| v.to_plain_string())),
            KeySource::Composite { spec, bindings } => {
                let mut b = IndexMap::new();
                for (c, o) in bindings {
                    match val(o) {
                        Some(v) => b.insert(c.clone(), v),
                        None => return Ok(None),
                    };
                }
                spec.eval(&b).map(Some).map_err(|e| StoreError::Unsupported(format!("composite key: {e}")))
            }
        }
    }

    fn row_values(
        table: &ForeignTableDef,
        key: &str,
        cells: &BTreeMap<String, String>,
        wanted: impl Iterator<Item = usize>,
    ) -> Result<Vec<Value>, StoreError> {
        let cols = table.schema.columns();
        let mut vals = vec![Value::Null; cols.len()];
        for i in wanted {
            let c = &cols[i];
            let raw = if c.source_path() == "key" {
                Some(key)
            } else {
                cells.get(c.source_path()).map(String::as_str)
            };
            if let Some(raw) = raw {
                vals[i] = coerce(&Value::text(raw), c.ty).map_err(|e| StoreError::Coerce {
                    table: table.name.to_string(),
                    key: key.to_string(),
                    column: c.name.clone(),
                    message: e.to_string(),
                })?;
            }
        }
        Ok(vals)
    }
}

impl Wrapper for WideColumnWrapper {
    fn kind(&self) -> StoreKind {
        StoreKind::Widecolumn
    }

    fn capabilities(&self) -> Capabilities {
        CAPABILITIES
    }

    fn plan_scan(&self, req: &ScanRequest, caps: Capabilities) -> Result<ScanPlan, StoreError> {
        let table = &req.table;
        let cf = table.source_name();
        let base = self.family(&cf).map(|f| f.rows.len() as f64).unwrap_or(1000.0);
        let cols = table.schema.columns();
        let names: Vec<&str> = if caps.projection {
            req.required.iter().map(|&i| cols[i].source_path()).collect()
        } else {
            vec!["*"]
        };
        let names = if names.is_empty() { vec!["key"] } else { names };
        let mut plan = ScanPlan::unpushed(req, NativeQuery::CfScan { cf: cf.clone() }, String::new(), base);
        plan.projection_accepted = caps.projection;
        let mut text = format!("SELECT {} FROM {cf}", names.join(", "));
        if let Some((key, used)) = Self::key_source(req).filter(|_| caps.filter_eq_on_key) {
            let shown = Self::render_key(&key, None)?.map(|k| sql_quote(&k)).unwrap_or_else(|| "?".into());
            text.push_str(&format!(" WHERE key = {shown}"));
            plan.set_accepted(used);
            plan.est_rows = 1.0;
            plan.native = NativeQuery::KeyLookup { cf, key };
        }
        plan.limit_accepted = caps.limit && req.limit.is_some() && req.sort.is_empty() && req.aggregate.is_none() && plan.residual.is_empty();
        if let (true, Some(n)) = (plan.limit_accepted, req.limit) {
            text.push_str(&format!(" LIMIT {n}"));
            plan.est_rows = plan.est_rows.min(n as f64).max(1.0);
        }
        plan.native_text = text;
        Ok(plan)
    }

    fn open(&self, plan: &ScanPlan, params: &[Value], stats: &Stats) -> Result<Box<dyn Cursor>, StoreError> {
        let table = &plan.table;
        let name = table.name.to_string();
        let n = table.schema.len();
        // columns to materialize: everything unless projection was pushed
        let mut wanted: Vec<usize> = if plan.projection_accepted {
            plan.required.clone()
        } else {
            (0..n).collect()
        };
        let verify: Vec<usize> = plan.accepted.iter().map(|&i| plan.filters[i].column).collect();
        let mut rows = Vec::new();
        match &plan.native {
            NativeQuery::KeyLookup { cf, key } => {
                let fam = self.family(cf)?;
                let operands: Vec<&Operand> = match key {
                    KeySource::Direct(o) => vec![o],
                    KeySource::Composite { bindings, .. } => bindings.iter().map(|(_, o)| o).collect(),
                };
                // `= NULL` never matches; no probe is issued
                let k = if operands.iter().any(|o| o.bind(params).is_null()) {
                    None
                } else {
                    stats.record(&name, |s| s.point_gets += 1);
                    Self::render_key(key, Some(params))?
                };
                if let Some(cells) = k.as_deref().and_then(|k| fam.get(k)) {
                    let k = k.as_deref().unwrap_or_default();
                    let mut all = wanted.clone();
                    all.extend(&verify);
                    all.sort_unstable();
                    all.dedup();
                    let vals = Self::row_values(table, k, cells, all.into_iter())?;
                    if plan.accepted.iter().all(|&i| plan.filters[i].holds(&vals[plan.filters[i].column], params)) {
                        let mut out = vec![Value::Null; n];
                        for &i in &wanted {
                            out[i] = vals[i].clone();
                        }
                        rows.push(Row::new(out));
                    }
                }
            }
            NativeQuery::CfScan { cf } => {
                let fam = self.family(cf)?;
                stats.record(&name, |s| s.scans += 1);
                wanted.sort_unstable();
                wanted.dedup();
                for (k, cells) in fam.scan() {
                    rows.push(Row::new(Self::row_values(table, k, cells, wanted.iter().copied())?));
                }
            }
            _ => return Err(StoreError::Unsupported("plan was not produced by the wide-column store".into())),
        }
        if let (true, Some(l)) = (plan.limit_accepted, plan.limit) {
            rows.truncate(usize::try_from(l).unwrap_or(usize::MAX));
        }
        Ok(Box::new(VecCursor::new(rows, name, stats.clone())))
    }

    fn import_schema(&self, _sample: usize) -> Result<ImportReport, StoreError> {
        let mut report = ImportReport::default();
        for name in list_objects(&self.dir, "csv")? {
            match self.family(&name) {
                Ok(fam) => {
                    let mut columns = vec![ColumnDef::new("key", ScalarType::Text)];
                    for q in &fam.qualifiers {
                        let col = q.to_lowercase();
                        let mut def = ColumnDef::new(col.clone(), ScalarType::Text);
                        if col != *q {
                            def = def.with_option("mname", q.clone());
                        }
                        columns.push(def);
                    }
                    let mut options = Options::new();
                    options.insert("cf".into(), name.clone());
                    report.tables.push(TableDraft {
                        name: name.to_lowercase(),
                        columns,
                        options,
                    });
                }
                Err(e) => report.failures.push((name, e.to_string())),
            }
        }
        Ok(report)
    }
}
