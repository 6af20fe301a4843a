//! Reference answers computed directly over the generated normalized rows.

use std::collections::{BTreeSet, HashMap};

use super::gen::TpccData;
use super::{CustomerSel, LineStatus, OrderStatus, Tx, TxResult};
use crate::relmodel::Value;

fn int(v: &Value) -> i64 {
    match v {
        Value::Int(i) => *i,
        v => panic!("expected an integer, got {v}"),
    }
}

fn opt_ts(v: &Value) -> Option<i64> {
    match v {
        Value::Timestamp(t) => Some(*t),
        _ => None,
    }
}

fn float(v: &Value) -> f64 {
    match v {
        Value::Float(f) => *f,
        v => panic!("expected a float, got {v}"),
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::Text(s) => s.clone(),
        v => panic!("expected text, got {v}"),
    }
}

pub struct Oracle<'a> {
    data: &'a TpccData,
    next_o_id: HashMap<(i64, i64), i64>,
    stock_qty: HashMap<(i64, i64), i64>,
    /// Row indexes into `customer`, per (w, d).
    customers: HashMap<(i64, i64), Vec<usize>>,
    /// Row indexes into `orders`, per (w, d, c).
    orders: HashMap<(i64, i64, i64), Vec<usize>>,
    /// Row indexes into `order_line`, per (w, d, o).
    lines: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(data: &'a TpccData) -> Self {
        let mut o = Oracle {
            data,
            next_o_id: HashMap::new(),
            stock_qty: HashMap::new(),
            customers: HashMap::new(),
            orders: HashMap::new(),
            lines: HashMap::new(),
        };
        for r in &data.table("district").rows {
            o.next_o_id.insert((int(&r[1]), int(&r[0])), int(&r[9]));
        }
        for r in &data.table("stock").rows {
            o.stock_qty.insert((int(&r[1]), int(&r[0])), int(&r[2]));
        }
        for (i, r) in data.table("customer").rows.iter().enumerate() {
            o.customers.entry((int(&r[2]), int(&r[1]))).or_default().push(i);
        }
        for (i, r) in data.table("orders").rows.iter().enumerate() {
            o.orders.entry((int(&r[2]), int(&r[1]), int(&r[3]))).or_default().push(i);
        }
        for (i, r) in data.table("order_line").rows.iter().enumerate() {
            o.lines.entry((int(&r[2]), int(&r[1]), int(&r[0]))).or_default().push(i);
        }
        o
    }

    /// Distinct items among the district's latest 20 orders whose stock in
    /// the home warehouse is below `threshold`.
    pub fn stock_level(&self, w: i64, d: i64, threshold: i64) -> Option<i64> {
        let next = *self.next_o_id.get(&(w, d))?;
        let ol = self.data.table("order_line");
        let mut items = BTreeSet::new();
        for o in (next - 20).max(1)..next {
            for &i in self.lines.get(&(w, d, o)).into_iter().flatten() {
                items.insert(int(&ol.rows[i][4]));
            }
        }
        Some(
            items
                .into_iter()
                .filter(|i| self.stock_qty.get(&(w, *i)).is_some_and(|q| *q < threshold))
                .count() as i64,
        )
    }

    pub fn order_status(&self, w: i64, d: i64, sel: &CustomerSel) -> Option<OrderStatus> {
        let cust = self.data.table("customer");
        let in_district = self.customers.get(&(w, d))?;
        let row = match sel {
            CustomerSel::Id(c) => in_district.iter().map(|i| &cust.rows[*i]).find(|r| int(&r[0]) == *c)?,
            CustomerSel::LastName(last) => {
                let mut named: Vec<&Vec<Value>> = in_district
                    .iter()
                    .map(|i| &cust.rows[*i])
                    .filter(|r| text(&r[5]) == *last)
                    .collect();
                if named.is_empty() {
                    return None;
                }
                named.sort_by(|a, b| text(&a[3]).cmp(&text(&b[3])).then(int(&a[0]).cmp(&int(&b[0]))));
                named[(named.len() - 1) / 2]
            }
        };
        let c_id = int(&row[0]);
        let orders = self.data.table("orders");
        let latest = self
            .orders
            .get(&(w, d, c_id))?
            .iter()
            .map(|i| &orders.rows[*i])
            .max_by_key(|r| int(&r[0]))?;
        let o_id = int(&latest[0]);
        let ol = self.data.table("order_line");
        let mut lines: Vec<&Vec<Value>> = self
            .lines
            .get(&(w, d, o_id))
            .into_iter()
            .flatten()
            .map(|i| &ol.rows[*i])
            .collect();
        lines.sort_by_key(|r| int(&r[3]));
        Some(OrderStatus {
            c_id,
            c_first: text(&row[3]),
            c_middle: text(&row[4]),
            c_last: text(&row[5]),
            c_balance: float(&row[15]),
            o_id,
            o_entry_d: opt_ts(&latest[4]).expect("entry date is set"),
            o_carrier_id: match latest[5] {
                Value::Null => None,
                ref v => Some(int(v)),
            },
            lines: lines
                .into_iter()
                .map(|r| LineStatus {
                    i_id: int(&r[4]),
                    supply_w_id: int(&r[5]),
                    quantity: int(&r[7]),
                    amount: float(&r[8]),
                    delivery_d: opt_ts(&r[6]),
                })
                .collect(),
        })
    }

    pub fn run(&self, tx: &Tx) -> Option<TxResult> {
        match tx {
            Tx::StockLevel { w, d, threshold } => self.stock_level(*w, *d, *threshold).map(TxResult::StockLevel),
            Tx::OrderStatus { w, d, customer } => self.order_status(*w, *d, customer).map(TxResult::OrderStatus),
        }
    }
}
