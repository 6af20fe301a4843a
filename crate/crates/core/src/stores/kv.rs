//! Key-value wrapper: every query is a full namespace scan.

use std::path::PathBuf;
use std::sync::Arc;

use super::{list_objects, object_path, FileCache, KvNamespace, StoreError};
use crate::catalog::StoreKind;
use crate::relmodel::{coerce, ColumnDef, Options, Row, ScalarType, Value};
use crate::wrapper::{Capabilities, Cursor, ImportReport, NativeQuery, ScanPlan, ScanRequest, Stats, TableDraft, VecCursor, Wrapper};

pub struct KvWrapper {
    dir: PathBuf,
    cache: FileCache<KvNamespace>,
}

impl KvWrapper {
    pub fn new(dir: PathBuf) -> Self {
        KvWrapper {
            dir,
            cache: FileCache::default(),
        }
    }

    pub fn namespace(&self, name: &str) -> Result<Arc<KvNamespace>, StoreError> {
        let path = object_path(&self.dir, StoreKind::Kv, name);
        self.cache.get(&path, |p| KvNamespace::read_csv(name, p))
    }
}

impl Wrapper for KvWrapper {
    fn kind(&self) -> StoreKind {
        StoreKind::Kv
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::NONE
    }

    fn plan_scan(&self, req: &ScanRequest, _caps: Capabilities) -> Result<ScanPlan, StoreError> {
        let ns = req.table.source_name();
        let est = self.namespace(&ns).map(|n| n.entries.len() as f64).unwrap_or(1000.0);
        let text = format!("SCAN {ns}");
        Ok(ScanPlan::unpushed(req, NativeQuery::KvScan { namespace: ns }, text, est))
    }

    fn open(&self, plan: &ScanPlan, _params: &[Value], stats: &Stats) -> Result<Box<dyn Cursor>, StoreError> {
        let NativeQuery::KvScan { namespace } = &plan.native else {
            return Err(StoreError::Unsupported("plan was not produced by the key-value store".into()));
        };
        let ns = self.namespace(namespace)?;
        let table = &plan.table;
        let name = table.name.to_string();
        stats.record(&name, |s| s.scans += 1);
        let cols = table.schema.columns();
        let mut rows = Vec::with_capacity(ns.entries.len());
        for (k, v) in ns.scan() {
            let mut vals = Vec::with_capacity(cols.len());
            for c in cols {
                let raw = match c.source_path() {
                    "key" => k,
                    "value" => v,
                    _ => {
                        vals.push(Value::Null);
                        continue;
                    }
                };
                vals.push(coerce(&Value::text(raw.as_str()), c.ty).map_err(|e| StoreError::Coerce {
                    table: name.clone(),
                    key: k.clone(),
                    column: c.name.clone(),
                    message: e.to_string(),
                })?);
            }
            rows.push(Row::new(vals));
        }
        Ok(Box::new(VecCursor::new(rows, name, stats.clone())))
    }

    fn import_schema(&self, _sample: usize) -> Result<ImportReport, StoreError> {
        let mut report = ImportReport::default();
        for name in list_objects(&self.dir, "csv")? {
            if let Err(e) = self.namespace(&name) {
                report.failures.push((name, e.to_string()));
                continue;
            }
            let mut options = Options::new();
            options.insert("collection".into(), name.clone());
            report.tables.push(TableDraft {
                name: name.to_lowercase(),
                columns: vec![ColumnDef::new("key", ScalarType::Text), ColumnDef::new("value", ScalarType::Text)],
                options,
            });
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ForeignTableDef, QualifiedName};
    use crate::relmodel::RelSchema;
    use crate::wrapper::{FilterOp, Operand, ScanFilter};
    use std::fs;

    fn table() -> ForeignTableDef {
        ForeignTableDef {
            name: QualifiedName::new("r", "prices"),
            server: "r".into(),
            schema: RelSchema::new(vec![ColumnDef::new("key", ScalarType::Text), ColumnDef::new("value", ScalarType::Int)]).unwrap(),
            options: Options::new(),
        }
    }

    #[test]
    fn value_filter_is_residual_and_scans_once() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("prices.csv"), "key,value\na,1\nb,5\nc,9\n").unwrap();
        let w = KvWrapper::new(dir.path().into());
        let mut req = ScanRequest::new(table());
        let f = ScanFilter { column: 1, op: FilterOp::Gt, values: vec![Operand::Lit(Value::Int(2))] };
        req.filters = vec![f.clone()];
        req.required = vec![0, 1];
        let plan = w.plan_scan(&req, Capabilities::ALL).unwrap();
        assert_eq!(plan.residual, vec![0]);
        assert_eq!(plan.native_text, "SCAN prices");
        let stats = Stats::new();
        let mut c = w.open(&plan, &[], &stats).unwrap();
        let mut kept = Vec::new();
        while let Some(r) = c.next().unwrap() {
            if f.holds(r.get(1), &[]) {
                kept.push(r.get(0).clone());
            }
        }
        assert_eq!(kept, vec![Value::text("b"), Value::text("c")]);
        let t = stats.snapshot().table("r.prices");
        assert_eq!((t.scans, t.rows_emitted), (1, 3));
    }

    #[test]
    fn empty_namespace() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("prices.csv"), "key,value\n").unwrap();
        let w = KvWrapper::new(dir.path().into());
        let ns = w.namespace("prices").unwrap();
        assert_eq!(ns.get("a"), None);
        let plan = w.plan_scan(&ScanRequest::new(table()), Capabilities::NONE).unwrap();
        assert!(w.open(&plan, &[], &Stats::new()).unwrap().next().unwrap().is_none());
    }
}
