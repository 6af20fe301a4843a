//! Random transaction mixes and their execution through the mediator.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gen::TpccData;
use super::{Backend, CustomerSel, LineStatus, OrderStatus, Tx, TxResult};
use crate::engine::{Engine, Error};
use crate::relmodel::{quote_text, Row, Value};
use crate::wrapper::TableStats;

/// Draws `n` transactions, half Stock-Level and half Order-Status on
/// average. Order-Status selects by last name 60% of the time, always using
/// a name that occurs in the chosen district.
pub fn draw(data: &TpccData, seed: u64, n: usize) -> Vec<Tx> {
    let p = &data.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cust = data.table("customer");
    (0..n)
        .map(|_| {
            let w = rng.gen_range(1..=p.warehouses as i64);
            let d = rng.gen_range(1..=p.districts_per_warehouse as i64);
            if rng.gen_bool(0.5) {
                Tx::StockLevel {
                    w,
                    d,
                    threshold: rng.gen_range(10..=20),
                }
            } else {
                let c = rng.gen_range(1..=p.customers_per_district as i64);
                let customer = if rng.gen_bool(0.6) {
                    let row = cust
                        .rows
                        .iter()
                        .find(|r| r[0] == Value::Int(c) && r[1] == Value::Int(d) && r[2] == Value::Int(w))
                        .expect("customer exists");
                    match &row[5] {
                        Value::Text(s) => CustomerSel::LastName(s.clone()),
                        v => panic!("c_last is {v}"),
                    }
                } else {
                    CustomerSel::Id(c)
                };
                Tx::OrderStatus { w, d, customer }
            }
        })
        .collect()
}

/// Result of one transaction against one backend.
#[derive(Debug, Clone)]
pub struct TxRun {
    pub result: TxResult,
    /// Statements issued, in order.
    pub statements: Vec<String>,
    /// Store transfer counters summed over all statements.
    pub stats: TableStats,
    pub elapsed: Duration,
}

struct Session<'a> {
    engine: &'a Engine,
    statements: Vec<String>,
    stats: TableStats,
}

impl Session<'_> {
    fn query(&mut self, sql: String) -> Result<Vec<Row>, Error> {
        let r = self.engine.query(&sql)?;
        self.stats += r.stats.total();
        self.statements.push(sql);
        Ok(r.rows)
    }
}

fn bad(what: &str, v: &Value) -> Error {
    Error::Invalid(format!("unexpected {what} value {v}"))
}

/// Integer from an integer or integral float column.
fn as_int(v: &Value) -> Result<i64, Error> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Float(f) if f.fract() == 0.0 => Ok(*f as i64),
        v => Err(bad("integer", v)),
    }
}

fn as_opt_int(v: &Value) -> Result<Option<i64>, Error> {
    match v {
        Value::Null => Ok(None),
        v => as_int(v).map(Some),
    }
}

fn as_float(v: &Value) -> Result<f64, Error> {
    match v {
        Value::Float(f) => Ok(*f),
        v => Err(bad("numeric", v)),
    }
}

fn as_text(v: &Value) -> Result<String, Error> {
    match v {
        Value::Text(s) => Ok(s.clone()),
        v => Err(bad("text", v)),
    }
}

fn as_opt_ts(v: &Value) -> Result<Option<i64>, Error> {
    match v {
        Value::Null => Ok(None),
        Value::Timestamp(t) => Ok(Some(*t)),
        v => Err(bad("timestamp", v)),
    }
}

fn stock_level(s: &mut Session, schema: &str, w: i64, d: i64, threshold: i64) -> Result<TxResult, Error> {
    let rows = s.query(format!(
        "SELECT d_next_o_id FROM {schema}.district WHERE d_w_id = {w} AND d_id = {d}"
    ))?;
    let [row] = rows.as_slice() else {
        return Err(Error::Invalid(format!("district ({w}, {d}) not found")));
    };
    let next = as_int(&row[0])?;
    let rows = s.query(format!(
        "SELECT COUNT(DISTINCT ol.ol_i_id) FROM {schema}.order_line ol \
         JOIN {schema}.stock st ON st.s_i_id = ol.ol_i_id \
         WHERE ol.ol_w_id = {w} AND ol.ol_d_id = {d} \
         AND ol.ol_o_id >= {} AND ol.ol_o_id < {next} \
         AND st.s_w_id = {w} AND st.s_quantity < {threshold}",
        next - 20
    ))?;
    Ok(TxResult::StockLevel(as_int(&rows[0][0])?))
}

fn order_status(s: &mut Session, schema: &str, w: i64, d: i64, sel: &CustomerSel) -> Result<TxResult, Error> {
    let cols = "c_id, c_first, c_middle, c_last, c_balance";
    let rows = match sel {
        CustomerSel::Id(c) => s.query(format!(
            "SELECT {cols} FROM {schema}.customer WHERE c_w_id = {w} AND c_d_id = {d} AND c_id = {c}"
        ))?,
        CustomerSel::LastName(last) => s.query(format!(
            "SELECT {cols} FROM {schema}.customer WHERE c_w_id = {w} AND c_d_id = {d} AND c_last = {} \
             ORDER BY c_first, c_id",
            quote_text(last)
        ))?,
    };
    if rows.is_empty() {
        return Err(Error::Invalid(format!("no customer {sel:?} in ({w}, {d})")));
    }
    let c = &rows[(rows.len() - 1) / 2];
    let c_id = as_int(&c[0])?;
    let orders = s.query(format!(
        "SELECT o_id, o_entry_d, o_carrier_id FROM {schema}.orders \
         WHERE o_w_id = {w} AND o_d_id = {d} AND o_c_id = {c_id} ORDER BY o_id DESC LIMIT 1"
    ))?;
    let [o] = orders.as_slice() else {
        return Err(Error::Invalid(format!("customer {c_id} has no orders")));
    };
    let o_id = as_int(&o[0])?;
    let lines = s.query(format!(
        "SELECT ol_i_id, ol_supply_w_id, ol_quantity, ol_amount, ol_delivery_d FROM {schema}.order_line \
         WHERE ol_w_id = {w} AND ol_d_id = {d} AND ol_o_id = {o_id} ORDER BY ol_number"
    ))?;
    Ok(TxResult::OrderStatus(OrderStatus {
        c_id,
        c_first: as_text(&c[1])?,
        c_middle: as_text(&c[2])?,
        c_last: as_text(&c[3])?,
        c_balance: as_float(&c[4])?,
        o_id,
        o_entry_d: as_opt_ts(&o[1])?.ok_or_else(|| bad("o_entry_d", &Value::Null))?,
        o_carrier_id: as_opt_int(&o[2])?,
        lines: lines
            .iter()
            .map(|l| {
                Ok(LineStatus {
                    i_id: as_int(&l[0])?,
                    supply_w_id: as_int(&l[1])?,
                    quantity: as_int(&l[2])?,
                    amount: as_float(&l[3])?,
                    delivery_d: as_opt_ts(&l[4])?,
                })
            })
            .collect::<Result<_, Error>>()?,
    }))
}

/// Runs one transaction against the backend's schema.
pub fn run_tx(engine: &Engine, backend: Backend, tx: &Tx) -> Result<TxRun, Error> {
    let start = Instant::now();
    let mut s = Session {
        engine,
        statements: Vec::new(),
        stats: TableStats::default(),
    };
    let schema = backend.schema();
    let result = match tx {
        Tx::StockLevel { w, d, threshold } => stock_level(&mut s, schema, *w, *d, *threshold)?,
        Tx::OrderStatus { w, d, customer } => order_status(&mut s, schema, *w, *d, customer)?,
    };
    Ok(TxRun {
        result,
        statements: s.statements,
        stats: s.stats,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Transactions run concurrently on the rayon pool. Falls back to
    /// sequential when built without the `parallel` feature.
    Parallel,
}

/// Runs a batch of independent transactions; results keep input order.
pub fn run_batch(engine: &Engine, backend: Backend, txs: &[Tx], mode: ExecMode) -> Vec<Result<TxRun, Error>> {
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            txs.par_iter().map(|t| run_tx(engine, backend, t)).collect()
        }
        _ => txs.iter().map(|t| run_tx(engine, backend, t)).collect(),
    }
}
