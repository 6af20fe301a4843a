//! Pull-based (Volcano) execution of planner output.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::accum::Accumulator;
use crate::catalog::QualifiedName;
use crate::planner::{BExpr, Node, Plan};
use crate::relmodel::{sort_cmp, Row, Value};
use crate::stores::pipeline;
use crate::wrapper::{Cursor, ScanPlan, Stats, Wrapper};

/// Failure of one operator; `operator` names it the way EXPLAIN does.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{operator}: {message}")]
pub struct ExecError {
    pub operator: String,
    pub message: String,
}

/// Current contents of materialized views.
pub trait ViewSource: Send + Sync {
    fn rows(&self, name: &QualifiedName) -> Option<Arc<Vec<Row>>>;
}

/// A view source with no views.
pub struct NoViews;

impl ViewSource for NoViews {
    fn rows(&self, _: &QualifiedName) -> Option<Arc<Vec<Row>>> {
        None
    }
}

pub struct ExecContext {
    pub stats: Stats,
    pub views: Arc<dyn ViewSource>,
}

impl ExecContext {
    pub fn new(views: Arc<dyn ViewSource>) -> Self {
        ExecContext { stats: Stats::new(), views }
    }
}

pub trait Operator {
    fn next(&mut self) -> Result<Option<Row>, ExecError>;

    /// Releases store cursors and buffered state. Calling it twice is harmless.
    fn close(&mut self);
}

type Op<'a> = Box<dyn Operator + 'a>;

fn op_name(plan: &Plan) -> String {
    match &plan.node {
        Node::ForeignScan { scan, .. } => format!("ForeignScan {}", scan.table.name),
        Node::BindJoin { inner, .. } => format!("BindJoin {}", inner.table.name),
        Node::ViewScan(n) => format!("ViewScan {n}"),
        _ => plan.label.split(' ').next().unwrap_or_default().to_string(),
    }
}

fn err(op: &str, message: impl ToString) -> ExecError {
    ExecError {
        operator: op.to_string(),
        message: message.to_string(),
    }
}

fn eval_all(exprs: &[BExpr], row: &[Value], op: &str) -> Result<Vec<Value>, ExecError> {
    exprs.iter().map(|e| e.eval(row).map_err(|m| err(op, m))).collect()
}

fn concat(l: &Row, r: &Row) -> Row {
    let mut v = Vec::with_capacity(l.len() + r.len());
    v.extend_from_slice(l.values());
    v.extend_from_slice(r.values());
    Row::new(v)
}

/// Builds the operator tree for `plan`.
pub fn build<'a>(plan: &'a Plan, ctx: &'a ExecContext) -> Op<'a> {
    let name = op_name(plan);
    match &plan.node {
        Node::Values(rows) => Box::new(ValuesOp { rows: rows.iter() }),
        Node::ForeignScan { scan, wrapper } => Box::new(ScanOp {
            name,
            scan,
            wrapper,
            stats: &ctx.stats,
            cursor: None,
            done: false,
        }),
        Node::ViewScan(view) => Box::new(ViewOp {
            name,
            view,
            ctx,
            rows: None,
            pos: 0,
        }),
        Node::Unnest { input, column, path } => Box::new(UnnestOp {
            name,
            input: build(input, ctx),
            column: *column,
            path,
            buf: VecDeque::new(),
        }),
        Node::Filter { input, pred } => Box::new(FilterOp {
            name,
            input: build(input, ctx),
            pred,
        }),
        Node::Project { input, exprs } => Box::new(ProjectOp {
            name,
            input: build(input, ctx),
            exprs,
        }),
        Node::HashJoin {
            left,
            right,
            left_keys,
            right_keys,
        } => Box::new(HashJoinOp {
            name,
            left: build(left, ctx),
            right: Some(build(right, ctx)),
            left_keys,
            right_keys,
            table: HashMap::new(),
            pending: VecDeque::new(),
        }),
        Node::NestedLoop { left, right } => Box::new(NestedLoopOp {
            left: build(left, ctx),
            right: Some(build(right, ctx)),
            inner: Vec::new(),
            pending: VecDeque::new(),
        }),
        Node::BindJoin {
            outer,
            inner,
            wrapper,
            params,
            inner_filter,
            ..
        } => Box::new(BindJoinOp {
            name,
            outer: build(outer, ctx),
            inner,
            wrapper,
            params,
            inner_filter: inner_filter.as_ref(),
            stats: &ctx.stats,
            memo: HashMap::new(),
            pending: VecDeque::new(),
        }),
        Node::Aggregate { input, groups, aggs } => Box::new(AggregateOp {
            name,
            input: build(input, ctx),
            groups,
            aggs,
            out: None,
        }),
        Node::Sort { input, keys } => Box::new(SortOp {
            name,
            input: build(input, ctx),
            keys,
            out: None,
        }),
        Node::Limit { input, n } => Box::new(LimitOp {
            input: build(input, ctx),
            left: *n,
        }),
        Node::Distinct { input } => Box::new(DistinctOp {
            input: build(input, ctx),
            seen: HashSet::new(),
        }),
    }
}

/// Runs `plan` to completion.
pub fn collect(plan: &Plan, ctx: &ExecContext) -> Result<Vec<Row>, ExecError> {
    let mut op = build(plan, ctx);
    let mut rows = Vec::new();
    let res = loop {
        match op.next() {
            Ok(Some(r)) => rows.push(r),
            Ok(None) => break Ok(rows),
            Err(e) => break Err(e),
        }
    };
    op.close();
    res
}

struct ValuesOp<'a> {
    rows: std::slice::Iter<'a, Row>,
}

impl Operator for ValuesOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        Ok(self.rows.next().cloned())
    }

    fn close(&mut self) {}
}

struct ScanOp<'a> {
    name: String,
    scan: &'a ScanPlan,
    wrapper: &'a Arc<dyn Wrapper>,
    stats: &'a Stats,
    cursor: Option<Box<dyn Cursor>>,
    done: bool,
}

impl Operator for ScanOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.done {
            return Ok(None);
        }
        if self.cursor.is_none() {
            self.cursor = Some(self.wrapper.open(self.scan, &[], self.stats).map_err(|e| err(&self.name, e))?);
        }
        let r = self.cursor.as_mut().expect("opened").next().map_err(|e| err(&self.name, e))?;
        if r.is_none() {
            self.close();
        }
        Ok(r)
    }

    fn close(&mut self) {
        self.cursor = None;
        self.done = true;
    }
}

struct ViewOp<'a> {
    name: String,
    view: &'a QualifiedName,
    ctx: &'a ExecContext,
    rows: Option<Arc<Vec<Row>>>,
    pos: usize,
}

impl Operator for ViewOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.rows.is_none() {
            let rows = self
                .ctx
                .views
                .rows(self.view)
                .ok_or_else(|| err(&self.name, format!("materialized view {} has not been populated", self.view)))?;
            self.rows = Some(rows);
        }
        let rows = self.rows.as_ref().expect("loaded");
        let r = rows.get(self.pos).cloned();
        self.pos += 1;
        Ok(r)
    }

    fn close(&mut self) {
        self.rows = None;
    }
}

struct UnnestOp<'a> {
    name: String,
    input: Op<'a>,
    column: usize,
    path: &'a str,
    buf: VecDeque<Row>,
}

impl Operator for UnnestOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.buf.pop_front() {
                return Ok(Some(r));
            }
            let Some(row) = self.input.next()? else { return Ok(None) };
            let mut vals = row.into_values();
            let Value::Document(doc) = std::mem::replace(&mut vals[self.column], Value::Null) else {
                continue;
            };
            let mut docs = Vec::new();
            pipeline::unwind(doc, self.path, &mut docs).map_err(|e| err(&self.name, e))?;
            for d in docs {
                let mut v = vals.clone();
                v[self.column] = Value::Document(d);
                self.buf.push_back(Row::new(v));
            }
        }
    }

    fn close(&mut self) {
        self.buf.clear();
        self.input.close();
    }
}

struct FilterOp<'a> {
    name: String,
    input: Op<'a>,
    pred: &'a BExpr,
}

impl Operator for FilterOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        while let Some(r) = self.input.next()? {
            if self.pred.holds(r.values()).map_err(|m| err(&self.name, m))? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn close(&mut self) {
        self.input.close();
    }
}

struct ProjectOp<'a> {
    name: String,
    input: Op<'a>,
    exprs: &'a [BExpr],
}

impl Operator for ProjectOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        match self.input.next()? {
            Some(r) => Ok(Some(Row::new(eval_all(self.exprs, r.values(), &self.name)?))),
            None => Ok(None),
        }
    }

    fn close(&mut self) {
        self.input.close();
    }
}

struct HashJoinOp<'a> {
    name: String,
    left: Op<'a>,
    /// Build side; consumed on the first probe row.
    right: Option<Op<'a>>,
    left_keys: &'a [BExpr],
    right_keys: &'a [BExpr],
    table: HashMap<Vec<Value>, Vec<Row>>,
    pending: VecDeque<Row>,
}

impl HashJoinOp<'_> {
    fn build_side(&mut self) -> Result<(), ExecError> {
        let Some(mut right) = self.right.take() else { return Ok(()) };
        while let Some(r) = right.next()? {
            let key = eval_all(self.right_keys, r.values(), &self.name)?;
            if key.iter().any(Value::is_null) {
                continue;
            }
            self.table.entry(key).or_default().push(r);
        }
        right.close();
        Ok(())
    }
}

impl Operator for HashJoinOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(l) = self.left.next()? else { return Ok(None) };
            self.build_side()?;
            let key = eval_all(self.left_keys, l.values(), &self.name)?;
            if key.iter().any(Value::is_null) {
                continue;
            }
            if let Some(matches) = self.table.get(&key) {
                self.pending.extend(matches.iter().map(|r| concat(&l, r)));
            }
        }
    }

    fn close(&mut self) {
        self.left.close();
        if let Some(r) = &mut self.right {
            r.close();
        }
        self.table.clear();
        self.pending.clear();
    }
}

struct NestedLoopOp<'a> {
    left: Op<'a>,
    right: Option<Op<'a>>,
    inner: Vec<Row>,
    pending: VecDeque<Row>,
}

impl Operator for NestedLoopOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(l) = self.left.next()? else { return Ok(None) };
            if let Some(mut right) = self.right.take() {
                while let Some(r) = right.next()? {
                    self.inner.push(r);
                }
                right.close();
            }
            self.pending.extend(self.inner.iter().map(|r| concat(&l, r)));
        }
    }

    fn close(&mut self) {
        self.left.close();
        if let Some(r) = &mut self.right {
            r.close();
        }
        self.inner.clear();
        self.pending.clear();
    }
}

struct BindJoinOp<'a> {
    name: String,
    outer: Op<'a>,
    inner: &'a ScanPlan,
    wrapper: &'a Arc<dyn Wrapper>,
    params: &'a [BExpr],
    inner_filter: Option<&'a BExpr>,
    stats: &'a Stats,
    /// Inner rows per distinct parameter tuple.
    memo: HashMap<Vec<Value>, Arc<Vec<Row>>>,
    pending: VecDeque<Row>,
}

impl BindJoinOp<'_> {
    fn fetch(&mut self, params: Vec<Value>) -> Result<Arc<Vec<Row>>, ExecError> {
        if let Some(rows) = self.memo.get(&params) {
            return Ok(rows.clone());
        }
        let mut cursor = self.wrapper.open(self.inner, &params, self.stats).map_err(|e| err(&self.name, e))?;
        let mut rows = Vec::new();
        while let Some(r) = cursor.next().map_err(|e| err(&self.name, e))? {
            let keep = match self.inner_filter {
                Some(f) => f.holds(r.values()).map_err(|m| err(&self.name, m))?,
                None => true,
            };
            if keep {
                rows.push(r);
            }
        }
        let rows = Arc::new(rows);
        self.memo.insert(params, rows.clone());
        Ok(rows)
    }
}

impl Operator for BindJoinOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(o) = self.outer.next()? else { return Ok(None) };
            let params = eval_all(self.params, o.values(), &self.name)?;
            if params.iter().any(Value::is_null) {
                continue;
            }
            let rows = self.fetch(params)?;
            self.pending.extend(rows.iter().map(|r| concat(&o, r)));
        }
    }

    fn close(&mut self) {
        self.outer.close();
        self.memo.clear();
        self.pending.clear();
    }
}

struct AggregateOp<'a> {
    name: String,
    input: Op<'a>,
    groups: &'a [BExpr],
    aggs: &'a [(crate::accum::AggFunc, Option<BExpr>)],
    out: Option<std::vec::IntoIter<Row>>,
}

impl AggregateOp<'_> {
    fn run(&mut self) -> Result<Vec<Row>, ExecError> {
        let fresh = || self.aggs.iter().map(|(f, _)| Accumulator::new(*f)).collect::<Vec<_>>();
        let mut table: IndexMap<Vec<Value>, Vec<Accumulator>> = IndexMap::new();
        if self.groups.is_empty() {
            table.insert(Vec::new(), fresh());
        }
        while let Some(r) = self.input.next()? {
            let key = eval_all(self.groups, r.values(), &self.name)?;
            let accs = table.entry(key).or_insert_with(fresh);
            for ((_, arg), acc) in self.aggs.iter().zip(accs.iter_mut()) {
                let v = match arg {
                    Some(a) => a.eval(r.values()).map_err(|m| err(&self.name, m))?,
                    None => Value::Null,
                };
                acc.update(&v).map_err(|m| err(&self.name, m))?;
            }
        }
        Ok(table
            .into_iter()
            .map(|(mut k, accs)| {
                k.extend(accs.iter().map(Accumulator::finish));
                Row::new(k)
            })
            .collect())
    }
}

impl Operator for AggregateOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.out.is_none() {
            let rows = self.run()?;
            self.input.close();
            self.out = Some(rows.into_iter());
        }
        Ok(self.out.as_mut().expect("computed").next())
    }

    fn close(&mut self) {
        self.input.close();
        self.out = Some(Vec::new().into_iter());
    }
}

struct SortOp<'a> {
    name: String,
    input: Op<'a>,
    keys: &'a [(BExpr, bool)],
    out: Option<std::vec::IntoIter<Row>>,
}

impl Operator for SortOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.out.is_none() {
            let exprs: Vec<BExpr> = self.keys.iter().map(|(e, _)| e.clone()).collect();
            let mut keyed = Vec::new();
            while let Some(r) = self.input.next()? {
                keyed.push((eval_all(&exprs, r.values(), &self.name)?, r));
            }
            self.input.close();
            keyed.sort_by(|(a, _), (b, _)| {
                for ((x, y), (_, desc)) in a.iter().zip(b).zip(self.keys) {
                    let o = sort_cmp(x, y);
                    let o = if *desc { o.reverse() } else { o };
                    if o.is_ne() {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            });
            self.out = Some(keyed.into_iter().map(|(_, r)| r).collect::<Vec<_>>().into_iter());
        }
        Ok(self.out.as_mut().expect("sorted").next())
    }

    fn close(&mut self) {
        self.input.close();
        self.out = Some(Vec::new().into_iter());
    }
}

struct LimitOp<'a> {
    input: Op<'a>,
    left: u64,
}

impl Operator for LimitOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.left == 0 {
            self.input.close();
            return Ok(None);
        }
        self.left -= 1;
        self.input.next()
    }

    fn close(&mut self) {
        self.input.close();
    }
}

struct DistinctOp<'a> {
    input: Op<'a>,
    seen: HashSet<Row>,
}

impl Operator for DistinctOp<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        while let Some(r) = self.input.next()? {
            if self.seen.insert(r.clone()) {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn close(&mut self) {
        self.input.close();
        self.seen.clear();
    }
}
