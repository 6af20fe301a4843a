//! Binds parsed queries against the catalog, negotiates push-down with the
//! wrappers and produces an executable operator tree.

pub mod expr;

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::accum::AggFunc;
use crate::catalog::{Catalog, CatalogError, ForeignTableDef, QualifiedName, Relation};
use crate::relmodel::{coerce, ColumnDef, Row, ScalarType, Value};
use crate::sqlfront::{BinOp, Expr, Query, SelectItem};
use crate::stores::StoreError;
use crate::wrapper::{AggRequest, Capabilities, FilterOp, Operand, OutputLayout, ScanFilter, ScanPlan, ScanRequest, Wrapper};

pub use expr::BExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinStrategy {
    Hash,
    Bind,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Largest estimated outer cardinality for which a bind join is chosen.
    pub bind_join_threshold: f64,
    /// Offer sort, limit and aggregation to the store as well as filters.
    pub extended_pushdown: bool,
    /// Intersected with every wrapper's own capabilities.
    pub capability_mask: Capabilities,
    pub force_join: Option<JoinStrategy>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            bind_join_threshold: 1000.0,
            extended_pushdown: false,
            capability_mask: Capabilities::ALL,
            force_join: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("column {0} does not exist")]
    UnknownColumn(String),
    #[error("column reference {0} is ambiguous")]
    Ambiguous(String),
    #[error("table name {0} specified more than once")]
    DuplicateAlias(String),
    #[error("{0}")]
    Type(String),
    #[error("{0}")]
    Grouping(String),
    #[error("{0}")]
    Invalid(String),
}

type Ty = Option<ScalarType>;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputColumn {
    pub name: String,
    pub ty: Ty,
}

pub enum Node {
    /// Constant rows; a query without FROM reads one empty row.
    Values(Vec<Row>),
    ForeignScan {
        scan: ScanPlan,
        wrapper: Arc<dyn Wrapper>,
    },
    ViewScan(QualifiedName),
    /// Replaces each input row by one row per element of the array at `path`
    /// inside the document in `column`.
    Unnest {
        input: Box<Plan>,
        column: usize,
        path: String,
    },
    Filter {
        input: Box<Plan>,
        pred: BExpr,
    },
    Project {
        input: Box<Plan>,
        exprs: Vec<BExpr>,
    },
    HashJoin {
        left: Box<Plan>,
        right: Box<Plan>,
        left_keys: Vec<BExpr>,
        right_keys: Vec<BExpr>,
    },
    NestedLoop {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    /// For each outer row, evaluates `params` and opens the inner scan with
    /// them bound; `inner_filter` applies to inner rows before concatenation.
    BindJoin {
        outer: Box<Plan>,
        inner: ScanPlan,
        wrapper: Arc<dyn Wrapper>,
        params: Vec<BExpr>,
        inner_filter: Option<BExpr>,
        inner_label: String,
    },
    /// Output rows are `[groups..., aggregates...]`.
    Aggregate {
        input: Box<Plan>,
        groups: Vec<BExpr>,
        aggs: Vec<(AggFunc, Option<BExpr>)>,
    },
    Sort {
        input: Box<Plan>,
        keys: Vec<(BExpr, bool)>,
    },
    Limit {
        input: Box<Plan>,
        n: u64,
    },
    Distinct {
        input: Box<Plan>,
    },
}

pub struct Plan {
    pub node: Node,
    pub label: String,
    pub est_rows: f64,
}

impl Plan {
    fn new(node: Node, label: String, est_rows: f64) -> Plan {
        Plan { node, label, est_rows }
    }

    pub fn children(&self) -> Vec<&Plan> {
        match &self.node {
            Node::Values(_) | Node::ForeignScan { .. } | Node::ViewScan(_) => vec![],
            Node::Unnest { input, .. }
            | Node::Filter { input, .. }
            | Node::Project { input, .. }
            | Node::Aggregate { input, .. }
            | Node::Sort { input, .. }
            | Node::Limit { input, .. }
            | Node::Distinct { input } => vec![input],
            Node::HashJoin { left, right, .. } | Node::NestedLoop { left, right } => vec![left, right],
            Node::BindJoin { outer, .. } => vec![outer],
        }
    }

    /// Indented operator tree, two spaces per level.
    pub fn explain(&self) -> String {
        let mut out = Vec::new();
        self.explain_into(0, &mut out);
        out.join("\n")
    }

    fn explain_into(&self, depth: usize, out: &mut Vec<String>) {
        if matches!(self.node, Node::Values(_)) {
            return;
        }
        out.push(format!("{}{}", "  ".repeat(depth), self.label));
        for c in self.children() {
            c.explain_into(depth + 1, out);
        }
        if let Node::BindJoin { inner_label, .. } = &self.node {
            out.push(format!("{}{}", "  ".repeat(depth + 1), inner_label));
        }
    }

    /// Scan plans of every foreign table access in the tree.
    pub fn scans(&self) -> Vec<&ScanPlan> {
        let mut out = Vec::new();
        self.collect_scans(&mut out);
        out
    }

    fn collect_scans<'a>(&'a self, out: &mut Vec<&'a ScanPlan>) {
        match &self.node {
            Node::ForeignScan { scan, .. } => out.push(scan),
            Node::BindJoin { inner, .. } => out.push(inner),
            _ => {}
        }
        for c in self.children() {
            c.collect_scans(out);
        }
    }
}

pub struct PlannedQuery {
    pub plan: Plan,
    pub columns: Vec<OutputColumn>,
    /// Relations read by the query, in FROM order.
    pub relations: Vec<QualifiedName>,
}

impl PlannedQuery {
    pub fn explain(&self) -> String {
        self.plan.explain()
    }
}

/// Static result type of a bound expression; `types` gives the input columns.
pub fn type_of(e: &BExpr, types: &[Ty]) -> Ty {
    match e {
        BExpr::Col(i) => types.get(*i).copied().flatten(),
        BExpr::Lit(v) => v.natural_type(),
        BExpr::Path { ty, .. } | BExpr::Cast { ty, .. } => Some(*ty),
        BExpr::Binary { op, left, right } => {
            if op.is_arithmetic() {
                arith_type(*op, type_of(left, types), type_of(right, types))
            } else {
                Some(ScalarType::Bool)
            }
        }
        BExpr::Neg(x) => type_of(x, types),
        BExpr::Not(_) | BExpr::InList { .. } | BExpr::IsNull { .. } => Some(ScalarType::Bool),
    }
}

fn arith_type(op: BinOp, l: Ty, r: Ty) -> Ty {
    if op == BinOp::Div {
        return Some(ScalarType::Double);
    }
    match (l, r) {
        (Some(a), Some(b)) if a.is_integer() && b.is_integer() => Some(ScalarType::BigInt),
        (Some(a), None) | (None, Some(a)) if a.is_integer() => Some(ScalarType::BigInt),
        (None, None) => None,
        _ => Some(ScalarType::Double),
    }
}

fn comparable(a: Ty, b: Ty) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a.is_numeric() && b.is_numeric()) || a == b,
        _ => true,
    }
}

fn ty_name(t: Ty) -> &'static str {
    t.map(ScalarType::sql_name).unwrap_or("unknown")
}

struct ScopeCol {
    rel: String,
    name: String,
    ty: ScalarType,
}

struct Scope {
    cols: Vec<ScopeCol>,
}

impl Scope {
    fn lookup(&self, table: Option<&str>, name: &str) -> Result<usize, PlanError> {
        let display = match table {
            Some(t) => format!("{t}.{name}"),
            None => name.to_string(),
        };
        let hits: Vec<usize> = self
            .cols
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name == name && table.is_none_or(|t| t == c.rel))
            .map(|(i, _)| i)
            .collect();
        match hits.len() {
            0 => Err(PlanError::UnknownColumn(display)),
            1 => Ok(hits[0]),
            _ => Err(PlanError::Ambiguous(display)),
        }
    }

    fn types(&self) -> Vec<Ty> {
        self.cols.iter().map(|c| Some(c.ty)).collect()
    }
}

#[derive(Default)]
struct AggState {
    groups: Vec<BExpr>,
    group_types: Vec<Ty>,
    aggs: Vec<(AggFunc, Option<BExpr>)>,
    agg_types: Vec<Ty>,
}

struct Binder<'a> {
    scope: &'a Scope,
    agg: Option<&'a mut AggState>,
}

fn expect_bool(t: Ty, what: &str) -> Result<(), PlanError> {
    match t {
        None | Some(ScalarType::Bool) => Ok(()),
        Some(t) => Err(PlanError::Type(format!("argument of {what} must be type BOOLEAN, not type {t}"))),
    }
}

fn expect_numeric(t: Ty, what: &str) -> Result<(), PlanError> {
    match t {
        Some(t) if !t.is_numeric() => Err(PlanError::Type(format!("{what} requires a numeric argument, not type {t}"))),
        _ => Ok(()),
    }
}

/// Coerces a text literal to the type of the other comparison operand.
fn adapt_literal(e: BExpr, t: Ty, target: Ty) -> Result<(BExpr, Ty), PlanError> {
    match (&e, target) {
        (BExpr::Lit(v @ Value::Text(_)), Some(tt)) if tt != ScalarType::Text => {
            let c = coerce(v, tt).map_err(|err| PlanError::Type(format!("invalid input for type {tt}: {err}")))?;
            Ok((BExpr::Lit(c), Some(tt)))
        }
        // numeric literals take the column's carrier when the value is exact
        (BExpr::Lit(Value::Int(i)), Some(tt)) if tt.is_float() && i.unsigned_abs() < (1 << 53) => {
            Ok((BExpr::Lit(Value::Float(*i as f64)), Some(tt)))
        }
        (BExpr::Lit(Value::Float(f)), Some(tt))
            if tt.is_integer() && f.fract() == 0.0 && f.abs() < 9.0e15 =>
        {
            Ok((BExpr::Lit(Value::Int(*f as i64)), Some(tt)))
        }
        _ => Ok((e, t)),
    }
}

impl<'a> Binder<'a> {
    fn plain(scope: &'a Scope) -> Self {
        Binder { scope, agg: None }
    }

    fn bind(&mut self, e: &Expr) -> Result<(BExpr, Ty), PlanError> {
        if self.agg.is_some() && !matches!(e, Expr::Literal(_)) {
            if let Expr::Agg { func, arg } = e {
                return self.bind_agg_call(*func, arg.as_deref());
            }
            if !e.contains_aggregate() {
                let (b, _) = Binder::plain(self.scope).bind(e)?;
                let st = self.agg.as_deref().expect("checked");
                if let Some(k) = st.groups.iter().position(|g| *g == b) {
                    return Ok((BExpr::Col(k), st.group_types[k]));
                }
                if let Expr::Column { table, name } = e {
                    let shown = table.as_ref().map(|t| format!("{t}.{name}")).unwrap_or_else(|| name.clone());
                    return Err(PlanError::Grouping(format!(
                        "column {shown} must appear in the GROUP BY clause or be used in an aggregate function"
                    )));
                }
            }
        }
        match e {
            Expr::Column { table, name } => {
                let i = self.scope.lookup(table.as_deref(), name)?;
                Ok((BExpr::Col(i), Some(self.scope.cols[i].ty)))
            }
            Expr::Literal(v) => Ok((BExpr::Lit(v.clone()), v.natural_type())),
            Expr::Agg { func, .. } => Err(PlanError::Invalid(format!("aggregate function {} is not allowed here", func.name()))),
            Expr::Not(x) => {
                let (b, t) = self.bind(x)?;
                expect_bool(t, "NOT")?;
                Ok((BExpr::Not(Box::new(b)), Some(ScalarType::Bool)))
            }
            Expr::Neg(x) => {
                let (b, t) = self.bind(x)?;
                expect_numeric(t, "unary minus")?;
                match b {
                    BExpr::Lit(Value::Int(i)) if i != i64::MIN => Ok((BExpr::Lit(Value::Int(-i)), t)),
                    BExpr::Lit(Value::Float(f)) => Ok((BExpr::Lit(Value::Float(-f)), t)),
                    b => Ok((BExpr::Neg(Box::new(b)), t)),
                }
            }
            Expr::IsNull { expr, negated } => {
                let (b, _) = self.bind(expr)?;
                Ok((BExpr::IsNull { expr: Box::new(b), negated: *negated }, Some(ScalarType::Bool)))
            }
            Expr::InList { expr, list, negated } => {
                let (b, t) = self.bind(expr)?;
                let mut items = Vec::with_capacity(list.len());
                for item in list {
                    let (ib, it) = self.bind(item)?;
                    let (ib, it) = adapt_literal(ib, it, t)?;
                    if !comparable(t, it) {
                        return Err(PlanError::Type(format!("IN list item of type {} does not match {}", ty_name(it), ty_name(t))));
                    }
                    items.push(ib);
                }
                Ok((
                    BExpr::InList {
                        expr: Box::new(b),
                        list: items,
                        negated: *negated,
                    },
                    Some(ScalarType::Bool),
                ))
            }
            Expr::Binary { op, left, right } => {
                let (l, lt) = self.bind(left)?;
                let (r, rt) = self.bind(right)?;
                match op {
                    BinOp::And | BinOp::Or => {
                        expect_bool(lt, op.symbol())?;
                        expect_bool(rt, op.symbol())?;
                        Ok((BExpr::binary(*op, l, r), Some(ScalarType::Bool)))
                    }
                    op if op.is_comparison() => {
                        let (r, rt) = adapt_literal(r, rt, lt)?;
                        let (l, lt) = adapt_literal(l, lt, rt)?;
                        if !comparable(lt, rt) {
                            return Err(PlanError::Type(format!("operator does not exist: {} {} {}", ty_name(lt), op.symbol(), ty_name(rt))));
                        }
                        Ok((BExpr::binary(*op, l, r), Some(ScalarType::Bool)))
                    }
                    op => {
                        for t in [lt, rt] {
                            if t.is_some_and(|t| !t.is_numeric()) {
                                return Err(PlanError::Type(format!("operator does not exist: {} {} {}", ty_name(lt), op.symbol(), ty_name(rt))));
                            }
                        }
                        Ok((BExpr::binary(*op, l, r), arith_type(*op, lt, rt)))
                    }
                }
            }
        }
    }

    fn bind_agg_call(&mut self, func: AggFunc, arg: Option<&Expr>) -> Result<(BExpr, Ty), PlanError> {
        let (a, t) = match arg {
            Some(x) => {
                if x.contains_aggregate() {
                    return Err(PlanError::Grouping("aggregate function calls cannot be nested".into()));
                }
                let (b, t) = Binder::plain(self.scope).bind(x)?;
                (Some(b), t)
            }
            None => (None, None),
        };
        let rt = match func {
            AggFunc::CountStar | AggFunc::Count | AggFunc::CountDistinct => Some(ScalarType::BigInt),
            AggFunc::Sum => {
                expect_numeric(t, "sum")?;
                t.map(|t| if t.is_integer() { ScalarType::BigInt } else { ScalarType::Double })
            }
            AggFunc::Avg => {
                expect_numeric(t, "avg")?;
                Some(ScalarType::Double)
            }
            AggFunc::Min | AggFunc::Max => t,
        };
        let st = self.agg.as_deref_mut().expect("aggregate context");
        let key = (func, a);
        let j = match st.aggs.iter().position(|x| *x == key) {
            Some(j) => j,
            None => {
                st.aggs.push(key);
                st.agg_types.push(rt);
                st.aggs.len() - 1
            }
        };
        Ok((BExpr::Col(st.groups.len() + j), st.agg_types[j]))
    }
}

fn split_conjuncts(e: BExpr, out: &mut Vec<BExpr>) {
    match e {
        BExpr::Binary { op: BinOp::And, left, right } => {
            split_conjuncts(*left, out);
            split_conjuncts(*right, out);
        }
        e => out.push(e),
    }
}

const CNF_LIMIT: usize = 16;

/// Conjunctive normal form of a predicate, or `None` when it would exceed
/// [`CNF_LIMIT`] clauses.
fn to_cnf(e: &BExpr) -> Option<Vec<BExpr>> {
    match e {
        BExpr::Binary { op: BinOp::And, left, right } => {
            let mut l = to_cnf(left)?;
            l.extend(to_cnf(right)?);
            (l.len() <= CNF_LIMIT).then_some(l)
        }
        BExpr::Binary { op: BinOp::Or, left, right } => {
            let (l, r) = (to_cnf(left)?, to_cnf(right)?);
            if l.len() * r.len() > CNF_LIMIT {
                return None;
            }
            Some(l.iter().flat_map(|a| r.iter().map(move |b| BExpr::binary(BinOp::Or, a.clone(), b.clone()))).collect())
        }
        other => Some(vec![other.clone()]),
    }
}

/// `c = v1 OR c = v2 OR ...` as the column and its literals.
fn or_of_equalities(e: &BExpr, col: &mut Option<usize>, vals: &mut Vec<Value>) -> bool {
    match e {
        BExpr::Binary { op: BinOp::Or, left, right } => or_of_equalities(left, col, vals) && or_of_equalities(right, col, vals),
        BExpr::Binary { op: BinOp::Eq, left, right } => {
            let (c, v) = match (&**left, &**right) {
                (BExpr::Col(c), BExpr::Lit(v)) | (BExpr::Lit(v), BExpr::Col(c)) => (*c, v),
                _ => return false,
            };
            if col.is_some_and(|x| x != c) {
                return false;
            }
            *col = Some(c);
            vals.push(v.clone());
            true
        }
        _ => false,
    }
}

fn agg_label(func: AggFunc, arg: &Option<BExpr>, names: &[String]) -> String {
    match (func, arg) {
        (AggFunc::CountStar, _) => "count(*)".into(),
        (AggFunc::CountDistinct, Some(a)) => format!("count(DISTINCT {})", a.render(names)),
        (f, Some(a)) => format!("{}({})", f.name(), a.render(names)),
        (f, None) => format!("{}()", f.name()),
    }
}

fn output_name(e: &Expr, alias: &Option<String>) -> String {
    if let Some(a) = alias {
        return a.clone();
    }
    match e {
        Expr::Column { name, .. } => name.clone(),
        Expr::Agg { func, .. } => func.name().to_string(),
        _ => "?column?".into(),
    }
}

enum RelSource {
    Table { def: ForeignTableDef, wrapper: Arc<dyn Wrapper> },
    View(QualifiedName),
}

struct RelInfo {
    visible: String,
    source: RelSource,
    offset: usize,
    columns: Vec<ColumnDef>,
}

impl RelInfo {
    fn width(&self) -> usize {
        self.columns.len()
    }

    fn contains(&self, col: usize) -> bool {
        col >= self.offset && col < self.offset + self.width()
    }
}

struct Conjunct {
    expr: BExpr,
    rels: BTreeSet<usize>,
    done: bool,
}

/// Extras offered to a single-table scan under extended push-down.
#[derive(Default, Clone)]
struct Extras {
    sort: Vec<(usize, bool)>,
    limit: Option<u64>,
    aggregate: Option<AggRequest>,
}

/// Access path for one relation; rows are in table-local positions.
struct Access {
    plan: Plan,
    /// True when the relation is a single foreign scan with nothing left to
    /// evaluate above it.
    clean: bool,
}

/// Resolves a server name to its wrapper.
pub type WrapperLookup<'a> = &'a dyn Fn(&str) -> Result<Arc<dyn Wrapper>, PlanError>;

/// Planner output before the final projection steps.
struct Bound {
    agg_mode: bool,
    agg: AggState,
    having: Option<BExpr>,
    select: Vec<BExpr>,
    columns: Vec<OutputColumn>,
    hidden: Vec<BExpr>,
    order: Vec<(usize, bool)>,
}

struct Planner<'a> {
    cfg: &'a PlannerConfig,
    rels: Vec<RelInfo>,
    scope: Scope,
    conj: Vec<Conjunct>,
    names: Vec<String>,
}

pub fn plan_query(q: &Query, catalog: &Catalog, wrappers: WrapperLookup<'_>, cfg: &PlannerConfig) -> Result<PlannedQuery, PlanError> {
    let mut rels = Vec::new();
    let mut relations = Vec::new();
    let mut on_exprs = Vec::new();
    let mut offset = 0;
    for twj in &q.from {
        let refs = std::iter::once(&twj.relation).chain(twj.joins.iter().map(|j| &j.relation));
        for tr in refs {
            let visible = tr.visible_name().to_string();
            if rels.iter().any(|r: &RelInfo| r.visible == visible) {
                return Err(PlanError::DuplicateAlias(visible));
            }
            let (source, columns) = match catalog.resolve(&tr.name)? {
                Relation::Table(def) => {
                    relations.push(def.name.clone());
                    let wrapper = wrappers(&def.server)?;
                    (RelSource::Table { def: def.clone(), wrapper }, def.schema.columns().to_vec())
                }
                Relation::View(v) => {
                    relations.push(v.name.clone());
                    (RelSource::View(v.name.clone()), v.columns.clone())
                }
            };
            let width = columns.len();
            rels.push(RelInfo { visible, source, offset, columns });
            offset += width;
        }
        on_exprs.extend(twj.joins.iter().map(|j| &j.on));
    }
    let scope = Scope {
        cols: rels
            .iter()
            .flat_map(|r| {
                r.columns.iter().map(|c| ScopeCol {
                    rel: r.visible.clone(),
                    name: c.name.clone(),
                    ty: c.ty,
                })
            })
            .collect(),
    };
    let qualify = rels.len() > 1;
    let names: Vec<String> = scope
        .cols
        .iter()
        .map(|c| if qualify { format!("{}.{}", c.rel, c.name) } else { c.name.clone() })
        .collect();

    let mut conj = Vec::new();
    for e in on_exprs.into_iter().chain(q.selection.as_ref()) {
        let (b, t) = Binder::plain(&scope).bind(e)?;
        expect_bool(t, "WHERE")?;
        let mut parts = Vec::new();
        split_conjuncts(b, &mut parts);
        for p in parts {
            let rels_of: BTreeSet<usize> = p
                .columns()
                .iter()
                .map(|c| rels.iter().position(|r| r.contains(*c)).expect("column in scope"))
                .collect();
            let clauses = if rels_of.len() == 1 { to_cnf(&p).unwrap_or_else(|| vec![p]) } else { vec![p] };
            for c in clauses {
                conj.push(Conjunct {
                    expr: c,
                    rels: rels_of.clone(),
                    done: false,
                });
            }
        }
    }

    let mut planner = Planner { cfg, rels, scope, conj, names };
    let bound = planner.bind_output(q)?;
    let plan = planner.build(q, &bound)?;
    Ok(PlannedQuery {
        plan,
        columns: bound.columns,
        relations,
    })
}

impl<'a> Planner<'a> {
    fn bind_output(&self, q: &Query) -> Result<Bound, PlanError> {
        let scope = &self.scope;
        // Expand wildcards into plain select items.
        let mut items: Vec<(Expr, Option<String>)> = Vec::new();
        for item in &q.projection {
            match item {
                SelectItem::Wildcard => {
                    if self.rels.is_empty() {
                        return Err(PlanError::Invalid("SELECT * with no tables specified is not valid".into()));
                    }
                    for c in &scope.cols {
                        items.push((Expr::qcol(&c.rel, &c.name), Some(c.name.clone())));
                    }
                }
                SelectItem::QualifiedWildcard(t) => {
                    let Some(r) = self.rels.iter().find(|r| r.visible == *t) else {
                        return Err(PlanError::Invalid(format!("missing FROM-clause entry for table {t}")));
                    };
                    for c in &r.columns {
                        items.push((Expr::qcol(t, &c.name), Some(c.name.clone())));
                    }
                }
                SelectItem::Expr { expr, alias } => items.push((expr.clone(), alias.clone())),
            }
        }
        let names: Vec<String> = items.iter().map(|(e, a)| output_name(e, a)).collect();

        let agg_mode = !q.group_by.is_empty()
            || q.having.is_some()
            || items.iter().any(|(e, _)| e.contains_aggregate())
            || q.order_by.iter().any(|o| o.expr.contains_aggregate());

        let mut agg = AggState::default();
        for g in &q.group_by {
            let target = match g {
                Expr::Literal(Value::Int(k)) => {
                    let k = usize::try_from(*k).ok().filter(|k| (1..=items.len()).contains(k));
                    let k = k.ok_or_else(|| PlanError::Invalid(format!("GROUP BY position {g:?} is not in select list")))?;
                    &items[k - 1].0
                }
                Expr::Column { table: None, name } if scope.lookup(None, name).is_err() => {
                    match names.iter().position(|n| n == name) {
                        Some(k) => &items[k].0,
                        None => g,
                    }
                }
                _ => g,
            };
            if target.contains_aggregate() {
                return Err(PlanError::Grouping("aggregate functions are not allowed in GROUP BY".into()));
            }
            let (b, t) = Binder::plain(scope).bind(target)?;
            if !agg.groups.contains(&b) {
                agg.groups.push(b);
                agg.group_types.push(t);
            }
        }

        let mut select = Vec::with_capacity(items.len());
        let mut columns = Vec::with_capacity(items.len());
        let mut having = None;
        let mut hidden = Vec::new();
        let mut order = Vec::new();
        {
            let mut binder = Binder {
                scope,
                agg: if agg_mode { Some(&mut agg) } else { None },
            };
            for ((e, _), name) in items.iter().zip(&names) {
                let (b, t) = binder.bind(e)?;
                select.push(b);
                columns.push(OutputColumn { name: name.clone(), ty: t });
            }
            if let Some(h) = &q.having {
                let (b, t) = binder.bind(h)?;
                expect_bool(t, "HAVING")?;
                having = Some(b);
            }
            for o in &q.order_by {
                let pos = match &o.expr {
                    Expr::Literal(Value::Int(k)) => {
                        let k = usize::try_from(*k).ok().filter(|k| (1..=items.len()).contains(k));
                        Some(k.ok_or_else(|| PlanError::Invalid(format!("ORDER BY position {} is not in select list", render_expr(&o.expr))))? - 1)
                    }
                    Expr::Column { table: None, name } => {
                        let hits: Vec<usize> = names.iter().enumerate().filter(|(_, n)| *n == name).map(|(i, _)| i).collect();
                        match hits.len() {
                            0 => None,
                            1 => Some(hits[0]),
                            _ => {
                                let same = hits.iter().all(|&h| select[h] == select[hits[0]]);
                                if !same {
                                    return Err(PlanError::Ambiguous(name.clone()));
                                }
                                Some(hits[0])
                            }
                        }
                    }
                    _ => None,
                };
                let pos = match pos {
                    Some(p) => p,
                    None => {
                        let (b, _) = binder.bind(&o.expr)?;
                        if let Some(p) = select.iter().position(|s| *s == b) {
                            p
                        } else if q.distinct {
                            return Err(PlanError::Invalid("for SELECT DISTINCT, ORDER BY expressions must appear in select list".into()));
                        } else if let Some(h) = hidden.iter().position(|h| *h == b) {
                            select.len() + h
                        } else {
                            hidden.push(b);
                            select.len() + hidden.len() - 1
                        }
                    }
                };
                order.push((pos, o.desc));
            }
        }
        Ok(Bound {
            agg_mode,
            agg,
            having,
            select,
            columns,
            hidden,
            order,
        })
    }

    fn caps(&self, w: &dyn Wrapper) -> Capabilities {
        w.capabilities().intersect(self.cfg.capability_mask)
    }

    /// Global columns referenced above the scans, ignoring conjuncts.
    fn post_columns(&self, b: &Bound) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut add = |e: &BExpr| out.extend(e.columns());
        if b.agg_mode {
            b.agg.groups.iter().for_each(&mut add);
            b.agg.aggs.iter().filter_map(|(_, a)| a.as_ref()).for_each(&mut add);
        } else {
            b.select.iter().chain(&b.hidden).for_each(&mut add);
        }
        out
    }

    /// `col op literal` over relation `r`, in table-local positions.
    fn scan_filter(&self, e: &BExpr, r: &RelInfo) -> Option<ScanFilter> {
        let local = |c: usize, v: &Value| -> Option<usize> {
            let lc = c - r.offset;
            let vt = v.natural_type()?;
            vt.same_carrier(r.columns[lc].ty).then_some(lc)
        };
        match e {
            BExpr::Binary { op, left, right } if op.is_comparison() => {
                let (c, v, op) = match (&**left, &**right) {
                    (BExpr::Col(c), BExpr::Lit(v)) => (*c, v, *op),
                    (BExpr::Lit(v), BExpr::Col(c)) => (*c, v, op.flip()),
                    _ => return None,
                };
                let fop = match op {
                    BinOp::Eq => FilterOp::Eq,
                    BinOp::NotEq => FilterOp::NotEq,
                    BinOp::Lt => FilterOp::Lt,
                    BinOp::LtEq => FilterOp::LtEq,
                    BinOp::Gt => FilterOp::Gt,
                    _ => FilterOp::GtEq,
                };
                Some(ScanFilter {
                    column: local(c, v)?,
                    op: fop,
                    values: vec![Operand::Lit(v.clone())],
                })
            }
            BExpr::Binary { op: BinOp::Or, .. } => {
                let (mut col, mut vals) = (None, Vec::new());
                if !or_of_equalities(e, &mut col, &mut vals) {
                    return None;
                }
                let c = col?;
                let lc = c - r.offset;
                for v in &vals {
                    local(c, v)?;
                }
                Some(ScanFilter {
                    column: lc,
                    op: FilterOp::In,
                    values: vals.into_iter().map(Operand::Lit).collect(),
                })
            }
            BExpr::InList { expr, list, negated: false } => {
                let BExpr::Col(c) = **expr else { return None };
                let mut values = Vec::with_capacity(list.len());
                for item in list {
                    let BExpr::Lit(v) = item else { return None };
                    local(c, v)?;
                    values.push(Operand::Lit(v.clone()));
                }
                Some(ScanFilter {
                    column: c - r.offset,
                    op: FilterOp::In,
                    values,
                })
            }
            _ => None,
        }
    }

    fn local_names(&self, r: &RelInfo) -> Vec<String> {
        r.columns.iter().map(|c| c.name.clone()).collect()
    }

    fn scan_label(&self, r: &RelInfo, plan: &ScanPlan) -> String {
        let mut s = format!("ForeignScan {}", plan.table.name);
        if r.visible != plan.table.name.name {
            s.push_str(&format!(" AS {}", r.visible));
        }
        if !plan.accepted.is_empty() {
            let fs: Vec<String> = plan.accepted.iter().map(|&i| plan.filters[i].render(plan.table.schema.columns())).collect();
            s.push_str(&format!(" filter=[{}]", fs.join(", ")));
        }
        let mut pushed = Vec::new();
        if plan.aggregate_accepted {
            pushed.push("aggregate");
        }
        if plan.sort_accepted {
            pushed.push("sort");
        }
        if plan.limit_accepted {
            pushed.push("limit");
        }
        if !pushed.is_empty() {
            s.push_str(&format!(" pushed=[{}]", pushed.join(", ")));
        }
        s.push_str(&format!(" native: {}", plan.native_text));
        s
    }

    /// Negotiates a scan of relation `ri`: offers the pushable local
    /// conjuncts plus `extra` filters, and trims the required columns to
    /// what the mediator still needs.
    fn negotiate(
        &self,
        ri: usize,
        def: &ForeignTableDef,
        wrapper: &dyn Wrapper,
        needed: &BTreeSet<usize>,
        local: &[(usize, ScanFilter)],
        extra: &[ScanFilter],
        extras: &Extras,
    ) -> Result<ScanPlan, PlanError> {
        let r = &self.rels[ri];
        let base: BTreeSet<usize> = needed.iter().filter(|c| r.contains(**c)).map(|c| c - r.offset).collect();
        let mut req = ScanRequest::new(def.clone());
        req.filters = local.iter().map(|(_, f)| f.clone()).chain(extra.iter().cloned()).collect();
        req.sort = extras.sort.clone();
        req.limit = extras.limit;
        req.aggregate = extras.aggregate.clone();
        let mut required = base.clone();
        required.extend(req.filters.iter().map(|f| f.column));
        req.required = required.into_iter().collect();
        let caps = self.caps(wrapper);
        let first = wrapper.plan_scan(&req, caps)?;
        let mut trimmed = base;
        trimmed.extend(first.residual_filters().map(|f| f.column));
        let trimmed: Vec<usize> = trimmed.into_iter().collect();
        if trimmed == req.required {
            return Ok(first);
        }
        req.required = trimmed;
        let second = wrapper.plan_scan(&req, caps)?;
        Ok(if second.accepted == first.accepted { second } else { first })
    }

    /// Access path for relation `ri` with its local conjuncts applied.
    fn access(&mut self, ri: usize, needed: &BTreeSet<usize>, extras: &Extras) -> Result<Access, PlanError> {
        let r = &self.rels[ri];
        let offset = r.offset;
        let local_idx: Vec<usize> = (0..self.conj.len())
            .filter(|&i| !self.conj[i].done && self.conj[i].rels.len() == 1 && self.conj[i].rels.contains(&ri))
            .collect();
        let to_local = |e: &BExpr| e.remap(&|c| c - offset);
        let names = self.local_names(r);
        let (mut plan, mut leftovers) = match &r.source {
            RelSource::View(name) => (
                Plan::new(Node::ViewScan(name.clone()), format!("ViewScan {name}"), 1000.0),
                local_idx.clone(),
            ),
            RelSource::Table { def, wrapper } => {
                let mut pushable = Vec::new();
                let mut other = Vec::new();
                for &i in &local_idx {
                    match self.scan_filter(&self.conj[i].expr, r) {
                        Some(f) => pushable.push((i, f)),
                        None => other.push(i),
                    }
                }
                let scan = self.negotiate(ri, def, wrapper.as_ref(), needed, &pushable, &[], extras)?;
                other.extend(scan.residual.iter().map(|&k| pushable[k].0));
                other.sort_unstable();
                let label = self.scan_label(r, &scan);
                let est = scan.est_rows;
                let layout = scan.layout.clone();
                let required = scan.required.clone();
                let mut plan = Plan::new(
                    Node::ForeignScan {
                        scan,
                        wrapper: wrapper.clone(),
                    },
                    label,
                    est,
                );
                if let OutputLayout::RawDocument { unwinds } = layout {
                    for path in unwinds {
                        let est = plan.est_rows;
                        plan = Plan::new(
                            Node::Unnest {
                                input: Box::new(plan),
                                column: 0,
                                path: path.clone(),
                            },
                            format!("Unnest {path}"),
                            est,
                        );
                    }
                    let exprs: Vec<BExpr> = r
                        .columns
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            if required.contains(&i) {
                                BExpr::Path {
                                    col: 0,
                                    path: c.source_path().to_string(),
                                    ty: c.ty,
                                }
                            } else {
                                BExpr::Lit(Value::Null)
                            }
                        })
                        .collect();
                    let shown: Vec<String> = required.iter().map(|&i| format!("{} <- {}", names[i], r.columns[i].source_path())).collect();
                    let est = plan.est_rows;
                    plan = Plan::new(
                        Node::Project {
                            input: Box::new(plan),
                            exprs,
                        },
                        format!("Project {}", shown.join(", ")),
                        est,
                    );
                }
                (plan, other)
            }
        };
        let clean = leftovers.is_empty() && matches!(plan.node, Node::ForeignScan { .. });
        if !leftovers.is_empty() {
            leftovers.sort_unstable();
            let pred = self.conjoin(leftovers.iter().map(|&i| to_local(&self.conj[i].expr)));
            let est = plan.est_rows * 0.5f64.powi(leftovers.len() as i32);
            let label = format!("Filter {}", pred.render(&names));
            plan = Plan::new(Node::Filter { input: Box::new(plan), pred }, label, est.max(1.0));
        }
        for i in local_idx {
            self.conj[i].done = true;
        }
        Ok(Access { plan, clean })
    }

    fn conjoin(&self, mut parts: impl Iterator<Item = BExpr>) -> BExpr {
        let first = parts.next().expect("at least one conjunct");
        parts.fold(first, |acc, p| BExpr::binary(BinOp::And, acc, p))
    }

    /// Applies every unplaced conjunct whose relations are all among the
    /// first `upto + 1`.
    fn place_filters(&mut self, plan: Plan, upto: usize) -> Plan {
        let ready: Vec<usize> = (0..self.conj.len())
            .filter(|&i| !self.conj[i].done && self.conj[i].rels.iter().all(|&r| r <= upto))
            .collect();
        if ready.is_empty() {
            return plan;
        }
        let pred = self.conjoin(ready.iter().map(|&i| self.conj[i].expr.clone()));
        for &i in &ready {
            self.conj[i].done = true;
        }
        let label = format!("Filter {}", pred.render(&self.names));
        let est = plan.est_rows;
        Plan::new(Node::Filter { input: Box::new(plan), pred }, label, est)
    }

    fn join_step(&mut self, outer: Plan, ri: usize, needed: &BTreeSet<usize>) -> Result<Plan, PlanError> {
        let offset = self.rels[ri].offset;
        let types = self.scope.types();
        // Equi-join conjuncts: (index, outer expr, inner expr in local positions).
        let mut equi: Vec<(usize, BExpr, BExpr)> = Vec::new();
        for (i, c) in self.conj.iter().enumerate() {
            if c.done || !c.rels.contains(&ri) || c.rels.len() < 2 || c.rels.iter().any(|&r| r > ri) {
                continue;
            }
            let BExpr::Binary { op: BinOp::Eq, left, right } = &c.expr else { continue };
            let side = |e: &BExpr| -> Option<bool> {
                let cols = e.columns();
                if cols.is_empty() {
                    return None;
                }
                if cols.iter().all(|&c| c >= offset) {
                    Some(true)
                } else if cols.iter().all(|&c| c < offset) {
                    Some(false)
                } else {
                    None
                }
            };
            let (o, inn) = match (side(left), side(right)) {
                (Some(false), Some(true)) => (left, right),
                (Some(true), Some(false)) => (right, left),
                _ => continue,
            };
            equi.push((i, (**o).clone(), inn.remap(&|c| c - offset)));
        }

        if let RelSource::Table { def, wrapper } = &self.rels[ri].source {
            let r = &self.rels[ri];
            let params: Vec<&(usize, BExpr, BExpr)> = equi
                .iter()
                .filter(|(_, o, inn)| match inn {
                    BExpr::Col(lc) => type_of(o, &types).is_some_and(|t| t.same_carrier(r.columns[*lc].ty)),
                    _ => false,
                })
                .collect();
            let allowed = self.cfg.force_join != Some(JoinStrategy::Hash)
                && (self.cfg.force_join == Some(JoinStrategy::Bind) || outer.est_rows <= self.cfg.bind_join_threshold);
            if allowed && !params.is_empty() {
                let param_filters: Vec<ScanFilter> = params
                    .iter()
                    .enumerate()
                    .map(|(k, (_, _, inn))| {
                        let BExpr::Col(lc) = inn else { unreachable!() };
                        ScanFilter {
                            column: *lc,
                            op: FilterOp::Eq,
                            values: vec![Operand::Param(k)],
                        }
                    })
                    .collect();
                let local_idx: Vec<usize> = (0..self.conj.len())
                    .filter(|&i| !self.conj[i].done && self.conj[i].rels.len() == 1 && self.conj[i].rels.contains(&ri))
                    .collect();
                let mut pushable = Vec::new();
                let mut other = Vec::new();
                for &i in &local_idx {
                    match self.scan_filter(&self.conj[i].expr, r) {
                        Some(f) => pushable.push((i, f)),
                        None => other.push(i),
                    }
                }
                let scan = self.negotiate(ri, def, wrapper.as_ref(), needed, &pushable, &param_filters, &Extras::default())?;
                let nlocal = pushable.len();
                let params_ok = (nlocal..nlocal + param_filters.len()).all(|k| scan.accepted.contains(&k));
                if params_ok && scan.layout == OutputLayout::Columns {
                    other.extend(scan.residual.iter().map(|&k| pushable[k].0));
                    other.sort_unstable();
                    let local_names = self.local_names(r);
                    let inner_filter = if other.is_empty() {
                        None
                    } else {
                        Some(self.conjoin(other.iter().map(|&i| self.conj[i].expr.remap(&|c| c - offset))))
                    };
                    let mut inner_label = self.scan_label(r, &scan);
                    if let Some(f) = &inner_filter {
                        inner_label.push_str(&format!(" recheck: {}", f.render(&local_names)));
                    }
                    let param_exprs: Vec<BExpr> = params.iter().map(|(_, o, _)| o.clone()).collect();
                    let shown: Vec<String> = param_exprs.iter().enumerate().map(|(k, e)| format!("${} = {}", k + 1, e.render(&self.names))).collect();
                    for &i in local_idx.iter().chain(params.iter().map(|(i, _, _)| i)) {
                        self.conj[i].done = true;
                    }
                    let est = outer.est_rows;
                    return Ok(Plan::new(
                        Node::BindJoin {
                            outer: Box::new(outer),
                            inner: scan,
                            wrapper: wrapper.clone(),
                            params: param_exprs,
                            inner_filter,
                            inner_label,
                        },
                        format!("BindJoin {}", shown.join(", ")),
                        est,
                    ));
                }
            }
        }

        let inner = self.access(ri, needed, &Extras::default())?.plan;
        let est = outer.est_rows.max(inner.est_rows);
        if equi.is_empty() {
            let est = outer.est_rows * inner.est_rows;
            return Ok(Plan::new(
                Node::NestedLoop {
                    left: Box::new(outer),
                    right: Box::new(inner),
                },
                "NestedLoop".into(),
                est,
            ));
        }
        let local_types: Vec<Ty> = self.rels[ri].columns.iter().map(|c| Some(c.ty)).collect();
        let mut left_keys = Vec::new();
        let mut right_keys = Vec::new();
        let mut shown = Vec::new();
        for (i, o, inn) in &equi {
            let (ot, it) = (type_of(o, &types), type_of(inn, &local_types));
            let (o, inn) = match (ot, it) {
                (Some(a), Some(b)) if a.is_numeric() && b.is_numeric() && !a.same_carrier(b) => (
                    BExpr::Cast { expr: Box::new(o.clone()), ty: ScalarType::Double },
                    BExpr::Cast { expr: Box::new(inn.clone()), ty: ScalarType::Double },
                ),
                _ => (o.clone(), inn.clone()),
            };
            shown.push(format!("{} = {}", o.render(&self.names), inn.remap(&|c| c + offset).render(&self.names)));
            left_keys.push(o);
            right_keys.push(inn);
            self.conj[*i].done = true;
        }
        Ok(Plan::new(
            Node::HashJoin {
                left: Box::new(outer),
                right: Box::new(inner),
                left_keys,
                right_keys,
            },
            format!("HashJoin {}", shown.join(", ")),
            est,
        ))
    }

    /// Extended push-down for a query over one foreign table whose filters
    /// were all accepted; returns the replacement scan and what it absorbed.
    fn try_extended(&mut self, b: &Bound, q: &Query, needed: &BTreeSet<usize>) -> Result<Option<(Access, bool, bool, bool)>, PlanError> {
        if !self.cfg.extended_pushdown || self.rels.len() != 1 {
            return Ok(None);
        }
        let RelSource::Table { .. } = &self.rels[0].source else { return Ok(None) };
        let mut extras = Extras::default();
        if b.agg_mode {
            let mut group = Vec::new();
            for g in &b.agg.groups {
                let BExpr::Col(c) = g else { return Ok(None) };
                group.push(*c);
            }
            let mut aggs = Vec::new();
            for (f, a) in &b.agg.aggs {
                match a {
                    None => aggs.push((*f, None)),
                    Some(BExpr::Col(c)) => aggs.push((*f, Some(*c))),
                    Some(_) => return Ok(None),
                }
            }
            extras.aggregate = Some(AggRequest { group, aggs });
        } else {
            if q.distinct {
                return Ok(None);
            }
            let all: Vec<&BExpr> = b.select.iter().chain(&b.hidden).collect();
            for &(p, desc) in &b.order {
                let BExpr::Col(c) = all[p] else { return Ok(None) };
                extras.sort.push((*c, desc));
            }
            extras.limit = q.limit;
            if extras.sort.is_empty() && extras.limit.is_none() {
                return Ok(None);
            }
        }
        let saved: Vec<bool> = self.conj.iter().map(|c| c.done).collect();
        let mut needed = needed.clone();
        if let Some(a) = &extras.aggregate {
            needed.extend(a.group.iter().copied());
            needed.extend(a.aggs.iter().filter_map(|(_, c)| *c));
        }
        needed.extend(extras.sort.iter().map(|(c, _)| *c));
        let acc = self.access(0, &needed, &extras)?;
        let Node::ForeignScan { scan, .. } = &acc.plan.node else {
            self.restore(saved);
            return Ok(None);
        };
        let (agg, sort, limit) = (scan.aggregate_accepted, scan.sort_accepted, scan.limit_accepted);
        if !acc.clean || !(agg || sort || limit) {
            self.restore(saved);
            return Ok(None);
        }
        Ok(Some((acc, agg, sort, limit)))
    }

    fn restore(&mut self, saved: Vec<bool>) {
        for (c, d) in self.conj.iter_mut().zip(saved) {
            c.done = d;
        }
    }

    fn build(&mut self, q: &Query, b: &Bound) -> Result<Plan, PlanError> {
        let post = self.post_columns(b);
        let mut needed = post.clone();
        for c in &self.conj {
            if c.rels.len() != 1 {
                needed.extend(c.expr.columns());
            }
        }
        // Local conjuncts that cannot become scan filters must read their columns too.
        for c in &self.conj {
            if c.rels.len() == 1 {
                let ri = *c.rels.iter().next().expect("one relation");
                if self.scan_filter(&c.expr, &self.rels[ri]).is_none() {
                    needed.extend(c.expr.columns());
                }
            }
        }

        let mut pushed = (false, false, false);
        let mut plan = if self.rels.is_empty() {
            Plan::new(Node::Values(vec![Row::new(vec![])]), String::new(), 1.0)
        } else if let Some((acc, agg, sort, limit)) = self.try_extended(b, q, &needed)? {
            pushed = (agg, sort, limit);
            acc.plan
        } else {
            let first = self.access(0, &needed, &Extras::default())?.plan;
            let mut plan = self.place_filters(first, 0);
            for ri in 1..self.rels.len() {
                plan = self.join_step(plan, ri, &needed)?;
                plan = self.place_filters(plan, ri);
            }
            plan
        };
        if self.rels.is_empty() {
            plan = self.place_filters(plan, 0);
        }

        let mut names = self.names.clone();
        if b.agg_mode {
            let agg_names: Vec<String> = b
                .agg
                .groups
                .iter()
                .map(|g| g.render(&names))
                .chain(b.agg.aggs.iter().map(|(f, a)| agg_label(*f, a, &names)))
                .collect();
            if !pushed.0 {
                let label = format!("Aggregate group=[{}] aggs=[{}]", agg_names[..b.agg.groups.len()].join(", "), agg_names[b.agg.groups.len()..].join(", "));
                let est = if b.agg.groups.is_empty() { 1.0 } else { (plan.est_rows * 0.1).max(1.0) };
                plan = Plan::new(
                    Node::Aggregate {
                        input: Box::new(plan),
                        groups: b.agg.groups.clone(),
                        aggs: b.agg.aggs.clone(),
                    },
                    label,
                    est,
                );
            }
            names = agg_names;
            if let Some(h) = &b.having {
                let label = format!("Filter {}", h.render(&names));
                let est = plan.est_rows;
                plan = Plan::new(Node::Filter { input: Box::new(plan), pred: h.clone() }, label, est);
            }
        }

        let exprs: Vec<BExpr> = b.select.iter().chain(&b.hidden).cloned().collect();
        let shown: Vec<String> = exprs.iter().map(|e| e.render(&names)).collect();
        let mut out_names: Vec<String> = b.columns.iter().map(|c| c.name.clone()).collect();
        out_names.extend(b.hidden.iter().map(|h| h.render(&names)));
        let est = plan.est_rows;
        plan = Plan::new(Node::Project { input: Box::new(plan), exprs }, format!("Project {}", shown.join(", ")), est);

        if q.distinct {
            let est = plan.est_rows;
            plan = Plan::new(Node::Distinct { input: Box::new(plan) }, "Distinct".into(), est);
        }
        let sort_done = pushed.1;
        if !b.order.is_empty() && !sort_done {
            let keys: Vec<(BExpr, bool)> = b.order.iter().map(|&(p, d)| (BExpr::Col(p), d)).collect();
            let shown: Vec<String> = b
                .order
                .iter()
                .map(|&(p, d)| format!("{}{}", out_names[p], if d { " DESC" } else { "" }))
                .collect();
            let est = plan.est_rows;
            plan = Plan::new(Node::Sort { input: Box::new(plan), keys }, format!("Sort {}", shown.join(", ")), est);
        }
        if let (Some(n), false) = (q.limit, pushed.2) {
            let est = plan.est_rows.min(n as f64);
            plan = Plan::new(Node::Limit { input: Box::new(plan), n }, format!("Limit {n}"), est);
        }
        if !b.hidden.is_empty() {
            let keep: Vec<BExpr> = (0..b.select.len()).map(BExpr::Col).collect();
            let shown = out_names[..b.select.len()].join(", ");
            let est = plan.est_rows;
            plan = Plan::new(Node::Project { input: Box::new(plan), exprs: keep }, format!("Project {shown}"), est);
        }
        Ok(plan)
    }
}

fn render_expr(e: &Expr) -> String {
    crate::sqlfront::render::expr(e)
}

#[cfg(test)]
mod tests;
