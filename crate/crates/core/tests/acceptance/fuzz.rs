//! Random queries over random data, checked against a naive full-scan
//! interpreter that works directly on the generated rows.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use polyqe::catalog::{Catalog, ServerDef, StoreKind};
use polyqe::engine::Engine;
use polyqe::planner::{JoinStrategy, PlannerConfig};
use polyqe::relmodel::{format_float, Document, Value};
use polyqe::stores::{object_path, ColumnFamily, DocCollection, KvNamespace};
use polyqe::wrapper::Capabilities;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Float,
    Text,
}

#[derive(Debug, Clone)]
pub struct Col {
    pub name: &'static str,
    pub ty: Ty,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub sql: String,
    pub cols: Vec<Col>,
    pub rows: Vec<Vec<Value>>,
}

/// Equi-join candidate: (left table, left column, right table, right column).
type JoinPair = (usize, usize, usize, usize);

pub struct Fixture {
    pub backend: &'static str,
    pub tables: Vec<Table>,
    pub joins: Vec<JoinPair>,
    pub engine: Engine,
    /// Same catalog with every wrapper capability masked off.
    pub nopush: Engine,
    pub bind: Engine,
    pub hash: Engine,
}

const TEXTS: [&str; 6] = ["alpha", "beta", "it's", "Gamma", "red", "delta"];
const TAGS: [&str; 3] = ["red", "blue", "green"];

fn maybe(rng: &mut ChaCha8Rng, p_null: f64, v: Value) -> Value {
    if rng.gen_bool(p_null) {
        Value::Null
    } else {
        v
    }
}

fn quarter(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Value {
    Value::Float(rng.gen_range(lo..=hi) as f64 * 0.25)
}

/// Logical rows of `a(id, g, x, y, s)` and `b(id, a_id, v, tag)`.
fn ab_rows(rng: &mut ChaCha8Rng) -> (Vec<Vec<Value>>, Vec<Vec<Value>>) {
    let a = (1..=40)
        .map(|id| {
            let g = ["a", "b", "c"].choose(rng).unwrap();
            let g = maybe(rng, 0.15, Value::text(*g));
            let x = Value::Int(rng.gen_range(-5..=5));
            let x = maybe(rng, 0.15, x);
            let y = quarter(rng, -20, 20);
            let y = maybe(rng, 0.15, y);
            vec![Value::Int(id), g, x, y, Value::text(*TEXTS.choose(rng).unwrap())]
        })
        .collect();
    let b = (1..=60)
        .map(|id| {
            let a_id = Value::Int(rng.gen_range(1..=45));
            let a_id = maybe(rng, 0.1, a_id);
            let v = Value::Float(rng.gen_range(-10..=10) as f64 * 0.5);
            let v = maybe(rng, 0.15, v);
            vec![Value::Int(id), a_id, v, Value::text(*TAGS.choose(rng).unwrap())]
        })
        .collect();
    (a, b)
}

fn a_cols() -> Vec<Col> {
    vec![
        Col { name: "id", ty: Ty::Int },
        Col { name: "g", ty: Ty::Text },
        Col { name: "x", ty: Ty::Int },
        Col { name: "y", ty: Ty::Float },
        Col { name: "s", ty: Ty::Text },
    ]
}

fn b_cols() -> Vec<Col> {
    vec![
        Col { name: "id", ty: Ty::Int },
        Col { name: "a_id", ty: Ty::Int },
        Col { name: "v", ty: Ty::Float },
        Col { name: "tag", ty: Ty::Text },
    ]
}

fn sql_type(t: Ty) -> &'static str {
    match t {
        Ty::Int => "INT",
        Ty::Float => "DOUBLE PRECISION",
        Ty::Text => "TEXT",
    }
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::Int(i) => Some(i.to_string()),
        Value::Float(f) => Some(format_float(*f)),
        Value::Text(s) => Some(s.clone()),
        other => panic!("unexpected fixture value {other:?}"),
    }
}

fn engines(base: Engine) -> (Engine, Engine, Engine, Engine) {
    let cat: Catalog = base.catalog().clone();
    let with = |cfg: PlannerConfig| Engine::new(cat.clone()).with_config(cfg);
    let nopush = with(PlannerConfig {
        capability_mask: Capabilities::NONE,
        ..PlannerConfig::default()
    });
    let bind = with(PlannerConfig {
        force_join: Some(JoinStrategy::Bind),
        ..PlannerConfig::default()
    });
    let hash = with(PlannerConfig {
        force_join: Some(JoinStrategy::Hash),
        ..PlannerConfig::default()
    });
    (base, nopush, bind, hash)
}

fn finish(backend: &'static str, tables: Vec<Table>, joins: Vec<JoinPair>, base: Engine) -> Fixture {
    let (engine, nopush, bind, hash) = engines(base);
    Fixture {
        backend,
        tables,
        joins,
        engine,
        nopush,
        bind,
        hash,
    }
}

fn ab_joins() -> Vec<JoinPair> {
    vec![(0, 0, 1, 1), (1, 1, 0, 0), (0, 2, 1, 0), (0, 3, 1, 2), (1, 3, 0, 4), (1, 0, 0, 2)]
}

/// Table `a` is a flat collection; `b` is unwound out of parent documents.
pub fn docstore(dir: &Path, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = ab_rows(&mut rng);
    let field = |d: &mut Document, rng: &mut ChaCha8Rng, k: &str, v: &Value| {
        match v {
            // a missing field and an explicit null both read as Null
            Value::Null if rng.gen_bool(0.5) => {}
            v => {
                d.insert(k.to_string(), v.clone());
            }
        }
    };
    let mut ca = DocCollection::new("A");
    for r in &a {
        let mut d = Document::new();
        for (c, v) in a_cols().iter().zip(r) {
            field(&mut d, &mut rng, &c.name.to_uppercase(), v);
        }
        ca.push(d).unwrap();
    }
    let mut cp = DocCollection::new("P");
    let mut items = b.iter().peekable();
    let mut pid = 0;
    while items.peek().is_some() || pid < 3 {
        pid += 1;
        let n = rng.gen_range(0..=4);
        let mut arr = Vec::new();
        for r in items.by_ref().take(n) {
            let mut d = Document::new();
            for (c, v) in b_cols().iter().zip(r) {
                field(&mut d, &mut rng, &c.name.to_uppercase(), v);
            }
            arr.push(Value::Document(d));
        }
        let mut p = Document::new();
        p.insert("PID".into(), Value::Int(pid));
        if !arr.is_empty() || rng.gen_bool(0.5) {
            p.insert("ITEMS".into(), Value::Array(arr));
        }
        cp.push(p).unwrap();
    }
    ca.write_jsonl(&object_path(dir, StoreKind::Docstore, "A")).unwrap();
    cp.write_jsonl(&object_path(dir, StoreKind::Docstore, "P")).unwrap();

    let engine = Engine::new(Catalog::new());
    engine.add_server(ServerDef::new("fzdoc", StoreKind::Docstore, &dir.display().to_string())).unwrap();
    let mut ddl = String::from("CREATE FOREIGN TABLE fzd.a (");
    let cols: Vec<String> = a_cols()
        .iter()
        .map(|c| format!("{} {} OPTIONS (mname '{}')", c.name, sql_type(c.ty), c.name.to_uppercase()))
        .collect();
    let _ = write!(ddl, "{}) SERVER fzdoc OPTIONS (collection 'A');\n", cols.join(", "));
    let cols: Vec<String> = b_cols()
        .iter()
        .map(|c| format!("{} {} OPTIONS (mname 'ITEMS.{}')", c.name, sql_type(c.ty), c.name.to_uppercase()))
        .collect();
    let _ = write!(
        ddl,
        "CREATE FOREIGN TABLE fzd.b ({}) SERVER fzdoc OPTIONS (collection 'P', pipe '[{{\"$unwind\": \"$ITEMS\"}}]');",
        cols.join(", ")
    );
    engine.execute_script(&ddl).unwrap();
    let tables = vec![
        Table { sql: "fzd.a".into(), cols: a_cols(), rows: a },
        Table { sql: "fzd.b".into(), cols: b_cols(), rows: b },
    ];
    finish("docstore", tables, ab_joins(), engine)
}

/// Both tables keyed by zero-padded `id` with a composite key spec.
pub fn widecolumn(dir: &Path, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = ab_rows(&mut rng);
    let engine = Engine::new(Catalog::new());
    engine.add_server(ServerDef::new("fzwide", StoreKind::Widecolumn, &dir.display().to_string())).unwrap();
    let mut ddl = String::new();
    for (name, cols, rows) in [("a", a_cols(), &a), ("b", b_cols(), &b)] {
        let mut cf = ColumnFamily::new(name, cols.iter().map(|c| c.name.to_string()).collect());
        for r in rows {
            let Value::Int(id) = r[0] else { unreachable!() };
            let cells = cols.iter().zip(r).filter_map(|(c, v)| text_of(v).map(|t| (c.name.to_string(), t))).collect();
            cf.rows.insert(format!("{id:05}"), cells);
        }
        cf.write_csv(&object_path(dir, StoreKind::Widecolumn, name)).unwrap();
        let defs: Vec<String> = cols.iter().map(|c| format!("{} {}", c.name, sql_type(c.ty))).collect();
        let _ = write!(
            ddl,
            "CREATE FOREIGN TABLE fzw.{name} (key TEXT OPTIONS (composite 'id:str(id).zfill(5)'), {}) \
             SERVER fzwide OPTIONS (cf '{name}');\n",
            defs.join(", ")
        );
    }
    engine.execute_script(&ddl).unwrap();
    let tables = vec![
        Table { sql: "fzw.a".into(), cols: a_cols(), rows: a },
        Table { sql: "fzw.b".into(), cols: b_cols(), rows: b },
    ];
    finish("widecolumn", tables, ab_joins(), engine)
}

/// Two namespaces: `ka(key INT, value INT)` and `kb(key INT, value DOUBLE)`.
pub fn kv(dir: &Path, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ka: Vec<Vec<Value>> = (1..=40).map(|k| vec![Value::Int(k), Value::Int(rng.gen_range(1..=35))]).collect();
    let kb: Vec<Vec<Value>> = (1..=30).map(|k| vec![Value::Int(k), quarter(&mut rng, -12, 12)]).collect();
    for (name, rows) in [("ka", &ka), ("kb", &kb)] {
        let mut ns = KvNamespace::default();
        ns.name = name.into();
        for r in rows {
            ns.entries.insert(text_of(&r[0]).unwrap(), text_of(&r[1]).unwrap());
        }
        ns.write_csv(&object_path(dir, StoreKind::Kv, name)).unwrap();
    }
    let engine = Engine::new(Catalog::new());
    engine.add_server(ServerDef::new("fzkv", StoreKind::Kv, &dir.display().to_string())).unwrap();
    engine
        .execute_script(
            "CREATE FOREIGN TABLE fzk.ka (key INT, value INT) SERVER fzkv OPTIONS (collection 'ka');
             CREATE FOREIGN TABLE fzk.kb (key INT, value DOUBLE PRECISION) SERVER fzkv OPTIONS (collection 'kb');",
        )
        .unwrap();
    let cols = |t: Ty| vec![Col { name: "key", ty: Ty::Int }, Col { name: "value", ty: t }];
    let tables = vec![
        Table { sql: "fzk.ka".into(), cols: cols(Ty::Int), rows: ka },
        Table { sql: "fzk.kb".into(), cols: cols(Ty::Float), rows: kb },
    ];
    finish("kv", tables, vec![(0, 1, 1, 0), (1, 0, 0, 0), (0, 0, 1, 0)], engine)
}

// ---------------------------------------------------------------- queries

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColRef {
    rel: usize,
    col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn sql(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "<>",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, o: Ordering) -> bool {
        match self {
            Cmp::Eq => o == Ordering::Equal,
            Cmp::Ne => o != Ordering::Equal,
            Cmp::Lt => o == Ordering::Less,
            Cmp::Le => o != Ordering::Greater,
            Cmp::Gt => o == Ordering::Greater,
            Cmp::Ge => o != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone)]
enum Pred {
    Cmp(ColRef, Cmp, Value),
    ColCmp(ColRef, Cmp, ColRef),
    IsNull(ColRef, bool),
    In(ColRef, Vec<Value>, bool),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arith {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone)]
enum Scalar {
    Col(ColRef),
    Arith(ColRef, Arith, Value),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Agg {
    CountStar,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone)]
enum Select {
    Plain(Vec<Scalar>),
    Grouped { groups: Vec<ColRef>, aggs: Vec<(Agg, Option<ColRef>)> },
}

#[derive(Debug, Clone)]
pub struct Query {
    /// Tables in FROM order, with the join columns when there are two.
    rels: Vec<usize>,
    on: Option<(usize, usize)>,
    distinct: bool,
    select: Select,
    pred: Option<Pred>,
    order: Vec<(usize, bool)>,
    limit: Option<usize>,
}

struct Gen<'a> {
    fx: &'a Fixture,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn col_ty(&self, rels: &[usize], c: ColRef) -> Ty {
        self.fx.tables[rels[c.rel]].cols[c.col].ty
    }

    fn any_col(&mut self, rels: &[usize]) -> ColRef {
        let rel = self.rng.gen_range(0..rels.len());
        let col = self.rng.gen_range(0..self.fx.tables[rels[rel]].cols.len());
        ColRef { rel, col }
    }

    fn col_of(&mut self, rels: &[usize], want: &[Ty]) -> Option<ColRef> {
        let all: Vec<ColRef> = (0..rels.len())
            .flat_map(|rel| (0..self.fx.tables[rels[rel]].cols.len()).map(move |col| ColRef { rel, col }))
            .filter(|c| want.contains(&self.col_ty(rels, *c)))
            .collect();
        all.choose(&mut self.rng).copied()
    }

    fn literal(&mut self, ty: Ty) -> Value {
        match ty {
            Ty::Int => Value::Int(self.rng.gen_range(-6..=46)),
            Ty::Float if self.rng.gen_bool(0.3) => Value::Int(self.rng.gen_range(-5..=5)),
            Ty::Float => quarter(&mut self.rng, -24, 24),
            Ty::Text => Value::text(*TEXTS.iter().chain(&TAGS).chain(&["a", "b", "zzz"]).collect::<Vec<_>>().choose(&mut self.rng).unwrap().to_owned()),
        }
    }

    fn cmp(&mut self) -> Cmp {
        *[Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge].choose(&mut self.rng).unwrap()
    }

    fn pred(&mut self, rels: &[usize], depth: u32) -> Pred {
        if depth == 0 || self.rng.gen_bool(0.45) {
            let c = self.any_col(rels);
            let ty = self.col_ty(rels, c);
            return match self.rng.gen_range(0..10) {
                0..=4 => {
                    let op = if self.rng.gen_bool(0.4) { Cmp::Eq } else { self.cmp() };
                    Pred::Cmp(c, op, self.literal(ty))
                }
                5 => Pred::IsNull(c, self.rng.gen()),
                6 | 7 => {
                    let n = self.rng.gen_range(1..=4);
                    let list = (0..n).map(|_| self.literal(ty)).collect();
                    Pred::In(c, list, self.rng.gen_bool(0.3))
                }
                _ => {
                    let numeric = [Ty::Int, Ty::Float];
                    let want: &[Ty] = if ty == Ty::Text { &[Ty::Text] } else { &numeric };
                    let d = self.col_of(rels, want).unwrap_or(c);
                    Pred::ColCmp(c, self.cmp(), d)
                }
            };
        }
        match self.rng.gen_range(0..5) {
            0 | 1 => Pred::And(Box::new(self.pred(rels, depth - 1)), Box::new(self.pred(rels, depth - 1))),
            2 | 3 => Pred::Or(Box::new(self.pred(rels, depth - 1)), Box::new(self.pred(rels, depth - 1))),
            _ => Pred::Not(Box::new(self.pred(rels, depth - 1))),
        }
    }

    fn scalar(&mut self, rels: &[usize]) -> Scalar {
        if self.rng.gen_bool(0.2) {
            if let Some(c) = self.col_of(rels, &[Ty::Int, Ty::Float]) {
                let op = *[Arith::Add, Arith::Sub, Arith::Mul].choose(&mut self.rng).unwrap();
                let lit = if self.rng.gen_bool(0.5) { Value::Int(self.rng.gen_range(-3..=3)) } else { quarter(&mut self.rng, -8, 8) };
                return Scalar::Arith(c, op, lit);
            }
        }
        Scalar::Col(self.any_col(rels))
    }

    fn query(&mut self) -> Query {
        let (rels, on) = if self.rng.gen_bool(0.35) && !self.fx.joins.is_empty() {
            let (lt, lc, rt, rc) = *self.fx.joins.choose(&mut self.rng).unwrap();
            (vec![lt, rt], Some((lc, rc)))
        } else {
            (vec![self.rng.gen_range(0..self.fx.tables.len())], None)
        };
        let select = if self.rng.gen_bool(0.3) {
            let groups = (0..self.rng.gen_range(0..=2)).map(|_| self.any_col(&rels)).collect();
            let aggs = (0..self.rng.gen_range(1..=4))
                .map(|_| {
                    let f = *[Agg::CountStar, Agg::Count, Agg::Sum, Agg::Avg, Agg::Min, Agg::Max].choose(&mut self.rng).unwrap();
                    match f {
                        Agg::CountStar => (f, None),
                        Agg::Sum | Agg::Avg => match self.col_of(&rels, &[Ty::Int, Ty::Float]) {
                            Some(c) => (f, Some(c)),
                            None => (Agg::CountStar, None),
                        },
                        _ => (f, Some(self.any_col(&rels))),
                    }
                })
                .collect();
            Select::Grouped { groups, aggs }
        } else {
            Select::Plain((0..self.rng.gen_range(1..=4)).map(|_| self.scalar(&rels)).collect())
        };
        let width = match &select {
            Select::Plain(s) => s.len(),
            Select::Grouped { groups, aggs } => groups.len() + aggs.len(),
        };
        let pred = self.rng.gen_bool(0.7).then(|| self.pred(&rels, 2));
        let limit = self.rng.gen_bool(0.25).then(|| self.rng.gen_range(0..8));
        let order = if limit.is_some() {
            // order by every output column so the kept prefix is determined
            let mut pos: Vec<usize> = (0..width).collect();
            pos.shuffle(&mut self.rng);
            pos.into_iter().map(|p| (p, self.rng.gen())).collect()
        } else if self.rng.gen_bool(0.4) {
            let n = self.rng.gen_range(1..=width);
            let mut pos: Vec<usize> = (0..width).collect();
            pos.shuffle(&mut self.rng);
            pos.into_iter().take(n).map(|p| (p, self.rng.gen())).collect()
        } else {
            Vec::new()
        };
        Query {
            rels,
            on,
            distinct: self.rng.gen_bool(0.2),
            select,
            pred,
            order,
            limit,
        }
    }
}

pub fn generate(fx: &Fixture, seed: u64, n: usize) -> Vec<Query> {
    let mut g = Gen {
        fx,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    (0..n).map(|_| g.query()).collect()
}

/// Every column of one table under a random predicate, with nothing else
/// on top, so the scan alone decides which rows come back.
#[allow(dead_code)]
pub fn filters(fx: &Fixture, seed: u64, n: usize) -> Vec<Query> {
    let mut g = Gen {
        fx,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    (0..n)
        .map(|_| {
            let t = g.rng.gen_range(0..fx.tables.len());
            let rels = vec![t];
            let pred = Some(g.pred(&rels, 2));
            let select = Select::Plain((0..fx.tables[t].cols.len()).map(|col| Scalar::Col(ColRef { rel: 0, col })).collect());
            Query {
                rels,
                on: None,
                distinct: false,
                select,
                pred,
                order: Vec::new(),
                limit: None,
            }
        })
        .collect()
}

impl Query {
    /// Index into `Fixture::tables` of the first table read.
    #[allow(dead_code)]
    pub fn table(&self) -> usize {
        self.rels[0]
    }
}

// ---------------------------------------------------------------- rendering

fn lit_sql(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{f:?}"),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        other => panic!("no literal for {other:?}"),
    }
}

impl Query {
    fn col_sql(&self, fx: &Fixture, c: ColRef) -> String {
        let name = fx.tables[self.rels[c.rel]].cols[c.col].name;
        if self.rels.len() == 1 {
            name.to_string()
        } else {
            format!("{}.{name}", ["l", "r"][c.rel])
        }
    }

    fn pred_sql(&self, fx: &Fixture, p: &Pred) -> String {
        match p {
            Pred::Cmp(c, op, v) => format!("{} {} {}", self.col_sql(fx, *c), op.sql(), lit_sql(v)),
            Pred::ColCmp(a, op, b) => format!("{} {} {}", self.col_sql(fx, *a), op.sql(), self.col_sql(fx, *b)),
            Pred::IsNull(c, neg) => format!("{} IS {}NULL", self.col_sql(fx, *c), if *neg { "NOT " } else { "" }),
            Pred::In(c, list, neg) => format!(
                "{} {}IN ({})",
                self.col_sql(fx, *c),
                if *neg { "NOT " } else { "" },
                list.iter().map(lit_sql).collect::<Vec<_>>().join(", ")
            ),
            Pred::And(a, b) => format!("({}) AND ({})", self.pred_sql(fx, a), self.pred_sql(fx, b)),
            Pred::Or(a, b) => format!("({}) OR ({})", self.pred_sql(fx, a), self.pred_sql(fx, b)),
            Pred::Not(a) => format!("NOT ({})", self.pred_sql(fx, a)),
        }
    }

    pub fn sql(&self, fx: &Fixture) -> String {
        let items: Vec<String> = match &self.select {
            Select::Plain(s) => s
                .iter()
                .map(|e| match e {
                    Scalar::Col(c) => self.col_sql(fx, *c),
                    Scalar::Arith(c, op, v) => {
                        let o = match op {
                            Arith::Add => "+",
                            Arith::Sub => "-",
                            Arith::Mul => "*",
                        };
                        format!("({} {o} {})", self.col_sql(fx, *c), lit_sql(v))
                    }
                })
                .collect(),
            Select::Grouped { groups, aggs } => groups
                .iter()
                .map(|g| self.col_sql(fx, *g))
                .chain(aggs.iter().map(|(f, c)| {
                    let arg = c.map(|c| self.col_sql(fx, c)).unwrap_or_else(|| "*".into());
                    let name = match f {
                        Agg::CountStar | Agg::Count => "COUNT",
                        Agg::Sum => "SUM",
                        Agg::Avg => "AVG",
                        Agg::Min => "MIN",
                        Agg::Max => "MAX",
                    };
                    format!("{name}({arg})")
                }))
                .collect(),
        };
        let mut s = format!("SELECT {}{}", if self.distinct { "DISTINCT " } else { "" }, items.join(", "));
        match self.on {
            None => {
                let _ = write!(s, " FROM {}", fx.tables[self.rels[0]].sql);
            }
            Some((lc, rc)) => {
                let (lt, rt) = (&fx.tables[self.rels[0]], &fx.tables[self.rels[1]]);
                let _ = write!(
                    s,
                    " FROM {} l JOIN {} r ON l.{} = r.{}",
                    lt.sql, rt.sql, lt.cols[lc].name, rt.cols[rc].name
                );
            }
        }
        if let Some(p) = &self.pred {
            let _ = write!(s, " WHERE {}", self.pred_sql(fx, p));
        }
        if let Select::Grouped { groups, .. } = &self.select {
            if !groups.is_empty() {
                let g: Vec<String> = groups.iter().map(|c| self.col_sql(fx, *c)).collect();
                let _ = write!(s, " GROUP BY {}", g.join(", "));
            }
        }
        if !self.order.is_empty() {
            let o: Vec<String> = self.order.iter().map(|(p, d)| format!("{}{}", p + 1, if *d { " DESC" } else { "" })).collect();
            let _ = write!(s, " ORDER BY {}", o.join(", "));
        }
        if let Some(n) = self.limit {
            let _ = write!(s, " LIMIT {n}");
        }
        s
    }
}

// ---------------------------------------------------------------- interpreter

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

/// SQL comparison; `None` when either side is Null.
fn cmp3(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        _ => num(a)?.partial_cmp(&num(b)?),
    }
}

/// Sort order: Null first, then by value.
fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => cmp3(a, b).unwrap_or(Ordering::Equal),
    }
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

impl Query {
    fn at<'r>(&self, fx: &Fixture, row: &'r [Value], c: ColRef) -> &'r Value {
        let offset = if c.rel == 0 { 0 } else { fx.tables[self.rels[0]].cols.len() };
        &row[offset + c.col]
    }

    fn eval_pred(&self, fx: &Fixture, row: &[Value], p: &Pred) -> Option<bool> {
        match p {
            Pred::Cmp(c, op, v) => cmp3(self.at(fx, row, *c), v).map(|o| op.holds(o)),
            Pred::ColCmp(a, op, b) => cmp3(self.at(fx, row, *a), self.at(fx, row, *b)).map(|o| op.holds(o)),
            Pred::IsNull(c, neg) => Some(self.at(fx, row, *c).is_null() != *neg),
            Pred::In(c, list, neg) => {
                let v = self.at(fx, row, *c);
                if v.is_null() {
                    return None;
                }
                let hit = list.iter().any(|l| cmp3(v, l) == Some(Ordering::Equal));
                Some(hit != *neg)
            }
            Pred::And(a, b) => and3(self.eval_pred(fx, row, a), self.eval_pred(fx, row, b)),
            Pred::Or(a, b) => or3(self.eval_pred(fx, row, a), self.eval_pred(fx, row, b)),
            Pred::Not(a) => self.eval_pred(fx, row, a).map(|b| !b),
        }
    }

    fn eval_scalar(&self, fx: &Fixture, row: &[Value], s: &Scalar) -> Value {
        match s {
            Scalar::Col(c) => self.at(fx, row, *c).clone(),
            Scalar::Arith(c, op, lit) => {
                let v = self.at(fx, row, *c);
                match (v, lit) {
                    (Value::Null, _) => Value::Null,
                    (Value::Int(a), Value::Int(b)) => Value::Int(match op {
                        Arith::Add => a + b,
                        Arith::Sub => a - b,
                        Arith::Mul => a * b,
                    }),
                    _ => {
                        let (a, b) = (num(v).unwrap(), num(lit).unwrap());
                        Value::Float(match op {
                            Arith::Add => a + b,
                            Arith::Sub => a - b,
                            Arith::Mul => a * b,
                        })
                    }
                }
            }
        }
    }

    fn aggregate(&self, fx: &Fixture, rows: &[Vec<Value>], f: Agg, c: Option<ColRef>) -> Value {
        let vals: Vec<&Value> = match c {
            Some(c) => rows.iter().map(|r| self.at(fx, r, c)).filter(|v| !v.is_null()).collect(),
            None => return Value::Int(rows.len() as i64),
        };
        match f {
            Agg::CountStar => Value::Int(rows.len() as i64),
            Agg::Count => Value::Int(vals.len() as i64),
            _ if vals.is_empty() => Value::Null,
            Agg::Sum | Agg::Avg => {
                let ints = vals.iter().all(|v| matches!(v, Value::Int(_)));
                if ints {
                    let s: i64 = vals.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).sum();
                    if f == Agg::Sum {
                        Value::Int(s)
                    } else {
                        Value::Float(s as f64 / vals.len() as f64)
                    }
                } else {
                    // every fixture float is a multiple of 0.25, so the sum is exact in any order
                    let s: f64 = vals.iter().map(|v| num(v).unwrap()).sum();
                    if f == Agg::Sum {
                        Value::Float(s)
                    } else {
                        Value::Float(s / vals.len() as f64)
                    }
                }
            }
            Agg::Min => (*vals.iter().min_by(|a, b| sort_cmp(a, b)).unwrap()).clone(),
            Agg::Max => (*vals.iter().max_by(|a, b| sort_cmp(a, b)).unwrap()).clone(),
        }
    }

    fn order_cmp(&self, a: &[Value], b: &[Value]) -> Ordering {
        for (p, desc) in &self.order {
            let o = sort_cmp(&a[*p], &b[*p]);
            let o = if *desc { o.reverse() } else { o };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    }

    /// Scan everything, join by nested loops, filter, aggregate, project.
    pub fn interpret(&self, fx: &Fixture) -> Vec<Vec<Value>> {
        let left = &fx.tables[self.rels[0]].rows;
        let mut rows: Vec<Vec<Value>> = match self.on {
            None => left.clone(),
            Some((lc, rc)) => {
                let right = &fx.tables[self.rels[1]].rows;
                let mut out = Vec::new();
                for l in left {
                    for r in right {
                        if cmp3(&l[lc], &r[rc]) == Some(Ordering::Equal) {
                            out.push(l.iter().chain(r).cloned().collect());
                        }
                    }
                }
                out
            }
        };
        if let Some(p) = &self.pred {
            rows.retain(|r| self.eval_pred(fx, r, p) == Some(true));
        }
        let mut out: Vec<Vec<Value>> = match &self.select {
            Select::Plain(items) => rows.iter().map(|r| items.iter().map(|s| self.eval_scalar(fx, r, s)).collect()).collect(),
            Select::Grouped { groups, aggs } => {
                let mut buckets: Vec<(Vec<Value>, Vec<Vec<Value>>)> = Vec::new();
                for r in rows {
                    let key: Vec<Value> = groups.iter().map(|g| self.at(fx, &r, *g).clone()).collect();
                    match buckets.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, members)) => members.push(r),
                        None => buckets.push((key, vec![r])),
                    }
                }
                if buckets.is_empty() && groups.is_empty() {
                    buckets.push((Vec::new(), Vec::new()));
                }
                buckets
                    .into_iter()
                    .map(|(key, members)| {
                        let mut row = key;
                        row.extend(aggs.iter().map(|(f, c)| self.aggregate(fx, &members, *f, *c)));
                        row
                    })
                    .collect()
            }
        };
        if self.distinct {
            let mut seen: Vec<Vec<Value>> = Vec::new();
            out.retain(|r| {
                if seen.contains(r) {
                    false
                } else {
                    seen.push(r.clone());
                    true
                }
            });
        }
        out.sort_by(|a, b| self.order_cmp(a, b));
        if let Some(n) = self.limit {
            out.truncate(n);
        }
        out
    }
}

fn multiset(rows: &[Vec<Value>]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(format!("{r:?}")).or_insert(0) += 1;
    }
    m
}

/// Runs every query on every engine variant of the fixture. Returns how
/// many queries had a non-empty expected result, and the mismatches.
pub fn check(fx: &Fixture, queries: &[Query]) -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let mut nonempty = 0;
    for q in queries {
        let sql = q.sql(fx);
        let want = q.interpret(fx);
        nonempty += usize::from(!want.is_empty());
        let mut variants = vec![("default", &fx.engine), ("no-pushdown", &fx.nopush)];
        if q.on.is_some() {
            variants.push(("bind-join", &fx.bind));
            variants.push(("hash-join", &fx.hash));
        }
        for (label, engine) in variants {
            let got = match engine.query(&sql) {
                Ok(r) => r.rows.into_iter().map(|r| r.into_values()).collect::<Vec<_>>(),
                Err(e) => {
                    failures.push(format!("[{} {label}] {sql}\n  error: {e}", fx.backend));
                    continue;
                }
            };
            if multiset(&got) != multiset(&want) {
                failures.push(format!(
                    "[{} {label}] {sql}\n  engine: {got:?}\n  oracle: {want:?}",
                    fx.backend
                ));
                continue;
            }
            if got.windows(2).any(|w| q.order_cmp(&w[0], &w[1]) == Ordering::Greater) {
                failures.push(format!("[{} {label}] {sql}\n  rows out of order: {got:?}", fx.backend));
            }
        }
    }
    (nonempty, failures)
}
