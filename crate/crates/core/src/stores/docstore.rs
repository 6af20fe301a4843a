//! Document-store wrapper: composes generated pipeline stages with a
//! table's `pipe` fragment.

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::Value as Json;

use super::pipeline::{self, render_stages, simplify, traverses, GroupAcc, GroupId, MatchCond, MatchOp, Pipe, ProjectItem, Stage};
use super::{list_objects, object_path, DocCollection, FileCache, StoreError};
use crate::accum::AggFunc;
use crate::catalog::{ForeignTableDef, StoreKind};
use crate::inference::{derive_mapping, infer, MappingOptions};
use crate::relmodel::{ColumnDef, Row, Value};
use crate::wrapper::{
    Capabilities, Cursor, FilterOp, ImportReport, NativeQuery, Operand, OutputLayout, ScanPlan, ScanRequest, Stats, VecCursor, Wrapper,
};

pub struct DocWrapper {
    dir: PathBuf,
    db: Option<String>,
    cache: FileCache<DocCollection>,
}

/// Field name under which column `i` leaves the pipeline.
fn out_name(col: &ColumnDef, i: usize) -> String {
    if col.name.is_empty() || col.name.contains(['.', '$']) {
        format!("_col{i}")
    } else {
        col.name.clone()
    }
}

fn match_op(op: FilterOp) -> MatchOp {
    match op {
        FilterOp::Eq => MatchOp::Eq,
        FilterOp::NotEq => MatchOp::Ne,
        FilterOp::Lt => MatchOp::Lt,
        FilterOp::LtEq => MatchOp::Lte,
        FilterOp::Gt => MatchOp::Gt,
        FilterOp::GtEq => MatchOp::Gte,
        FilterOp::In => MatchOp::In,
    }
}

/// Operand value, or a `"$$n"` placeholder when rendering a parameterized
/// plan.
fn bind(o: &Operand, params: Option<&[Value]>) -> Value {
    match (o, params) {
        (Operand::Lit(v), _) => v.clone(),
        (Operand::Param(i), Some(p)) => p.get(*i).cloned().unwrap_or(Value::Null),
        (Operand::Param(i), None) => Value::text(format!("$${}", i + 1)),
    }
}

fn pushable_agg(f: AggFunc, arg: Option<&ColumnDef>) -> bool {
    match f {
        AggFunc::CountStar | AggFunc::Min | AggFunc::Max => true,
        AggFunc::Avg => arg.is_some_and(|c| c.ty.is_numeric()),
        _ => false,
    }
}

impl DocWrapper {
    pub fn new(dir: PathBuf, db: Option<String>) -> Self {
        DocWrapper {
            dir,
            db,
            cache: FileCache::default(),
        }
    }

    pub fn collection(&self, name: &str) -> Result<Arc<DocCollection>, StoreError> {
        let path = object_path(&self.dir, StoreKind::Docstore, name);
        self.cache.get(&path, |p| DocCollection::read_jsonl(name, p))
    }

    fn table_pipe(table: &ForeignTableDef) -> Result<Pipe, StoreError> {
        match table.options.get("pipe") {
            Some(p) => Pipe::parse(p),
            None => Ok(Pipe {
                collection: None,
                stages: Vec::new(),
                extra: Default::default(),
            }),
        }
    }

    fn native_text(&self, table: &ForeignTableDef, pipe: &Pipe, stages: &[Stage]) -> String {
        let db = table.options.get("db").or(self.db.as_ref());
        let mut s = String::new();
        if let Some(db) = db {
            s.push_str(db);
            s.push('.');
        }
        s.push_str(&table.source_name());
        s.push_str(".aggregate(");
        s.push_str(&render_stages(stages));
        if !pipe.extra.is_empty() {
            s.push_str(", ");
            s.push_str(&Json::Object(pipe.extra.clone()).to_string());
        }
        s.push(')');
        s
    }

    /// Builds the full stage list for a plan whose push-down decisions are
    /// already made.
    fn compose(plan: &ScanPlan, pipe: &Pipe, params: Option<&[Value]>) -> Vec<Stage> {
        let cols = plan.table.schema.columns();
        if let OutputLayout::RawDocument { .. } = plan.layout {
            // whole documents; the mediator unnests
            return Vec::new();
        }
        let unwinds = pipe.unwind_paths();
        let hoistable = pipe.unwinds_only();
        let (mut pre, mut post) = (Vec::new(), Vec::new());
        for &i in &plan.accepted {
            let f = &plan.filters[i];
            let path = cols[f.column].source_path().to_string();
            let value = if f.op == FilterOp::In {
                Value::Array(f.values.iter().map(|o| bind(o, params)).collect())
            } else {
                bind(&f.values[0], params)
            };
            let cond = MatchCond { path, op: match_op(f.op), value };
            if hoistable && !unwinds.iter().any(|u| traverses(&cond.path, u)) {
                pre.push(cond);
            } else {
                post.push(cond);
            }
        }
        let mut stages = Vec::new();
        if !pre.is_empty() {
            stages.push(Stage::Match(pre));
        }
        stages.extend(pipe.stages.iter().cloned());
        if !post.is_empty() {
            stages.push(Stage::Match(post));
        }
        let mut needed: Vec<usize> = plan.required.clone();
        if let (true, Some(agg)) = (plan.aggregate_accepted, &plan.aggregate) {
            needed = agg.group.iter().copied().chain(agg.aggs.iter().filter_map(|(_, a)| *a)).collect();
        }
        needed.sort_unstable();
        needed.dedup();
        let mut items: Vec<(String, ProjectItem)> = needed
            .iter()
            .map(|&i| {
                (
                    out_name(&cols[i], i),
                    ProjectItem::Convert {
                        path: cols[i].source_path().to_string(),
                        to: cols[i].ty,
                    },
                )
            })
            .collect();
        if items.is_empty() {
            items.push(("_id".into(), ProjectItem::Include));
        } else if !items.iter().any(|(k, _)| k == "_id") {
            items.push(("_id".into(), ProjectItem::Exclude));
        }
        stages.push(Stage::Project(items));
        if plan.aggregate_accepted {
            let agg = plan.aggregate.as_ref().expect("accepted aggregate");
            let id = GroupId::Fields(agg.group.iter().enumerate().map(|(k, &c)| (format!("g{k}"), out_name(&cols[c], c))).collect());
            let accs = agg
                .aggs
                .iter()
                .enumerate()
                .map(|(k, (f, a))| {
                    let path = a.map(|c| out_name(&cols[c], c)).unwrap_or_default();
                    let acc = match f {
                        AggFunc::CountStar => GroupAcc::Count,
                        AggFunc::Min => GroupAcc::Min(path),
                        AggFunc::Max => GroupAcc::Max(path),
                        _ => GroupAcc::Avg(path),
                    };
                    (format!("a{k}"), acc)
                })
                .collect();
            stages.push(Stage::Group { id, accs });
            let mut flat: Vec<(String, ProjectItem)> = (0..agg.group.len())
                .map(|k| (format!("g{k}"), ProjectItem::Path(format!("_id.g{k}"))))
                .collect();
            flat.extend((0..agg.aggs.len()).map(|k| (format!("a{k}"), ProjectItem::Include)));
            flat.push(("_id".into(), ProjectItem::Exclude));
            stages.push(Stage::Project(flat));
        }
        if plan.sort_accepted {
            stages.push(Stage::Sort(plan.sort.iter().map(|&(c, d)| (out_name(&cols[c], c), d)).collect()));
        }
        if plan.limit_accepted {
            stages.push(Stage::Limit(plan.limit.expect("accepted limit")));
        }
        simplify(stages)
    }
}

impl Wrapper for DocWrapper {
    fn kind(&self) -> StoreKind {
        StoreKind::Docstore
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn plan_scan(&self, req: &ScanRequest, caps: Capabilities) -> Result<ScanPlan, StoreError> {
        let table = &req.table;
        let pipe = Self::table_pipe(table)?;
        let coll = table.source_name();
        let base = self.collection(&coll).map(|c| c.docs.len() as f64).unwrap_or(1000.0);
        let native = NativeQuery::Pipeline {
            collection: coll,
            stages: Vec::new(),
        };
        let mut plan = ScanPlan::unpushed(req, native, String::new(), base);
        if !(caps.native_fragment && caps.projection) {
            if !pipe.unwinds_only() {
                return Err(StoreError::Unsupported(format!(
                    "{}: pipe has stages other than $unwind and cannot be emulated without native fragments",
                    table.name
                )));
            }
            plan.layout = OutputLayout::RawDocument {
                unwinds: pipe.unwind_paths().into_iter().map(str::to_string).collect(),
            };
        } else {
            let cols = table.schema.columns();
            plan.projection_accepted = true;
            if caps.filter_general {
                plan.set_accepted((0..req.filters.len()).collect());
            }
            let all = plan.residual.is_empty();
            if let Some(agg) = &req.aggregate {
                plan.aggregate_accepted = caps.group_aggregate
                    && all
                    && !agg.group.is_empty()
                    && req.sort.is_empty()
                    && req.limit.is_none()
                    && agg.aggs.iter().all(|(f, a)| pushable_agg(*f, a.map(|c| &cols[c])));
            }
            plan.sort_accepted = caps.sort
                && all
                && req.aggregate.is_none()
                && !req.sort.is_empty()
                && req.sort.iter().all(|(c, _)| req.required.contains(c));
            plan.limit_accepted =
                caps.limit && all && req.aggregate.is_none() && req.limit.is_some() && (req.sort.is_empty() || plan.sort_accepted);
            plan.layout = if plan.aggregate_accepted {
                OutputLayout::Aggregated
            } else {
                OutputLayout::Columns
            };
            for &i in &plan.accepted {
                plan.est_rows *= if matches!(req.filters[i].op, FilterOp::Eq | FilterOp::In) { 0.1 } else { 0.3 };
            }
            if plan.aggregate_accepted {
                plan.est_rows *= 0.1;
            }
            if let (true, Some(n)) = (plan.limit_accepted, req.limit) {
                plan.est_rows = plan.est_rows.min(n as f64);
            }
            plan.est_rows = plan.est_rows.max(1.0);
        }
        let stages = Self::compose(&plan, &pipe, None);
        plan.native_text = self.native_text(table, &pipe, &stages);
        if let NativeQuery::Pipeline { stages: s, .. } = &mut plan.native {
            *s = stages;
        }
        Ok(plan)
    }

    fn open(&self, plan: &ScanPlan, params: &[Value], stats: &Stats) -> Result<Box<dyn Cursor>, StoreError> {
        let NativeQuery::Pipeline { collection, stages } = &plan.native else {
            return Err(StoreError::Unsupported("plan was not produced by the document store".into()));
        };
        let coll = self.collection(collection)?;
        let table = plan.table.name.to_string();
        stats.record(&table, |s| s.scans += 1);
        let bound;
        let stages = if params.is_empty() {
            stages
        } else {
            bound = Self::compose(plan, &Self::table_pipe(&plan.table)?, Some(params));
            &bound
        };
        let docs = pipeline::execute(&coll.docs, stages)?;
        let cols = plan.table.schema.columns();
        let rows: Vec<Row> = match &plan.layout {
            OutputLayout::RawDocument { .. } => docs.into_iter().map(|d| Row::new(vec![Value::Document(d)])).collect(),
            OutputLayout::Columns => docs
                .into_iter()
                .map(|d| {
                    let mut vals = vec![Value::Null; cols.len()];
                    for &i in &plan.required {
                        vals[i] = d.get(&out_name(&cols[i], i)).cloned().unwrap_or(Value::Null);
                    }
                    Row::new(vals)
                })
                .collect(),
            OutputLayout::Aggregated => {
                let agg = plan.aggregate.as_ref().expect("aggregated layout");
                let names: Vec<String> = (0..agg.group.len())
                    .map(|k| format!("g{k}"))
                    .chain((0..agg.aggs.len()).map(|k| format!("a{k}")))
                    .collect();
                docs.into_iter()
                    .map(|d| Row::new(names.iter().map(|n| d.get(n).cloned().unwrap_or(Value::Null)).collect()))
                    .collect()
            }
        };
        Ok(Box::new(VecCursor::new(rows, table, stats.clone())))
    }

    fn import_schema(&self, sample: usize) -> Result<ImportReport, StoreError> {
        let mut report = ImportReport::default();
        for name in list_objects(&self.dir, "jsonl")? {
            match self.collection(&name) {
                Ok(coll) => {
                    let ps = infer(&name, &coll.docs, sample);
                    let mut drafts = derive_mapping(&ps, &name.to_lowercase(), &MappingOptions::default());
                    if let Some(db) = &self.db {
                        for d in &mut drafts {
                            d.options.insert("db".into(), db.clone());
                        }
                    }
                    report.tables.extend(drafts);
                }
                Err(e) => report.failures.push((name, e.to_string())),
            }
        }
        Ok(report)
    }
}
