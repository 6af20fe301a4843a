//! Deterministic TPC-C population at desk scale.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::relmodel::{ColumnDef, ScalarType, Value};

use ScalarType::{Int, Numeric, SmallInt, Text, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpccParams {
    pub warehouses: u32,
    pub districts_per_warehouse: u32,
    pub customers_per_district: u32,
    /// Inclusive bounds on orders placed by each customer.
    pub orders_per_customer: (u32, u32),
    pub items: u32,
    pub seed: u64,
}

impl TpccParams {
    pub fn new(warehouses: u32, seed: u64) -> Self {
        TpccParams {
            warehouses,
            districts_per_warehouse: 10,
            customers_per_district: 30,
            orders_per_customer: (1, 5),
            items: 1000,
            seed,
        }
    }
}

/// One generated relation: column definitions, primary key column names and
/// rows in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<ColumnDef>,
    pub key: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(name: &'static str, cols: &[(&str, ScalarType)], key: &[&'static str]) -> Self {
        Table {
            name,
            columns: cols.iter().map(|(n, t)| ColumnDef::new(*n, *t)).collect(),
            key: key.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .unwrap_or_else(|| panic!("{} has no column {name}", self.name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpccData {
    pub params: TpccParams,
    pub tables: IndexMap<&'static str, Table>,
}

impl TpccData {
    pub fn table(&self, name: &str) -> &Table {
        &self.tables[name]
    }
}

pub const TABLES: [&str; 9] = [
    "warehouse",
    "district",
    "customer",
    "history",
    "new_order",
    "orders",
    "order_line",
    "item",
    "stock",
];

fn schemas() -> IndexMap<&'static str, Table> {
    let t = [
        Table::new(
            "warehouse",
            &[
                ("w_id", Int),
                ("w_name", Text),
                ("w_street_1", Text),
                ("w_city", Text),
                ("w_state", Text),
                ("w_zip", Text),
                ("w_tax", Numeric),
                ("w_ytd", Numeric),
            ],
            &["w_id"],
        ),
        Table::new(
            "district",
            &[
                ("d_id", SmallInt),
                ("d_w_id", SmallInt),
                ("d_name", Text),
                ("d_street_1", Text),
                ("d_city", Text),
                ("d_state", Text),
                ("d_zip", Text),
                ("d_tax", Numeric),
                ("d_ytd", Numeric),
                ("d_next_o_id", Int),
            ],
            &["d_id", "d_w_id"],
        ),
        Table::new(
            "customer",
            &[
                ("c_id", Int),
                ("c_d_id", Int),
                ("c_w_id", Int),
                ("c_first", Text),
                ("c_middle", Text),
                ("c_last", Text),
                ("c_street_1", Text),
                ("c_city", Text),
                ("c_state", Text),
                ("c_zip", Text),
                ("c_phone", Text),
                ("c_since", Timestamp),
                ("c_credit", Text),
                ("c_credit_lim", Numeric),
                ("c_discount", Numeric),
                ("c_balance", Numeric),
                ("c_ytd_payment", Numeric),
                ("c_payment_cnt", Int),
                ("c_delivery_cnt", Int),
                ("c_data", Text),
            ],
            &["c_id", "c_d_id", "c_w_id"],
        ),
        Table::new(
            "history",
            &[
                ("h_c_id", Int),
                ("h_c_d_id", Int),
                ("h_c_w_id", Int),
                ("h_d_id", Int),
                ("h_w_id", Int),
                ("h_date", Timestamp),
                ("h_amount", Numeric),
                ("h_data", Text),
            ],
            &["h_c_id", "h_c_d_id", "h_c_w_id"],
        ),
        Table::new(
            "new_order",
            &[("no_o_id", Int), ("no_d_id", Int), ("no_w_id", Int)],
            &["no_o_id", "no_d_id", "no_w_id"],
        ),
        Table::new(
            "orders",
            &[
                ("o_id", Int),
                ("o_d_id", Int),
                ("o_w_id", Int),
                ("o_c_id", Int),
                ("o_entry_d", Timestamp),
                ("o_carrier_id", Int),
                ("o_ol_cnt", Int),
                ("o_all_local", Int),
            ],
            &["o_id", "o_d_id", "o_w_id"],
        ),
        Table::new(
            "order_line",
            &[
                ("ol_o_id", Int),
                ("ol_d_id", Int),
                ("ol_w_id", Int),
                ("ol_number", Int),
                ("ol_i_id", Int),
                ("ol_supply_w_id", Int),
                ("ol_delivery_d", Timestamp),
                ("ol_quantity", Int),
                ("ol_amount", Numeric),
                ("ol_dist_info", Text),
            ],
            &["ol_o_id", "ol_d_id", "ol_w_id", "ol_number"],
        ),
        Table::new(
            "item",
            &[
                ("i_id", Int),
                ("i_im_id", Int),
                ("i_name", Text),
                ("i_price", Numeric),
                ("i_data", Text),
            ],
            &["i_id"],
        ),
        Table::new(
            "stock",
            &[
                ("s_i_id", Int),
                ("s_w_id", Int),
                ("s_quantity", Int),
                ("s_dist_01", Text),
                ("s_ytd", Int),
                ("s_order_cnt", Int),
                ("s_remote_cnt", Int),
                ("s_data", Text),
            ],
            &["s_i_id", "s_w_id"],
        ),
    ];
    t.into_iter().map(|t| (t.name, t)).collect()
}

const SYLLABLES: [&str; 10] = ["BAR", "OUGHT", "ABLE", "PRI", "PRES", "ESE", "ANTI", "CALLY", "ATION", "EING"];

/// Customer last name built from the three decimal digits of `n`.
pub fn last_name(n: u32) -> String {
    let n = n % 1000;
    format!(
        "{}{}{}",
        SYLLABLES[(n / 100) as usize],
        SYLLABLES[(n / 10 % 10) as usize],
        SYLLABLES[(n % 10) as usize]
    )
}

/// Base instant of generated timestamps: 2024-01-01 00:00:00 UTC.
pub const EPOCH_MICROS: i64 = 1_704_067_200_000_000;

fn astring(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn nstring(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| rng.gen_range(b'0'..=b'9') as char).collect()
}

/// Money as the double nearest to `cents / 100`.
fn money(cents: i64) -> Value {
    Value::Float(cents as f64 / 100.0)
}

fn int(i: impl Into<i64>) -> Value {
    Value::Int(i.into())
}

fn ts(offset_secs: i64) -> Value {
    Value::Timestamp(EPOCH_MICROS + offset_secs * 1_000_000)
}

/// Populates all nine tables. The same parameters always give the same data.
pub fn generate(p: &TpccParams) -> TpccData {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut tables = schemas();
    let mut push = |t: &str, row: Vec<Value>| tables[t].rows.push(row);

    for i in 1..=p.items {
        push(
            "item",
            vec![
                int(i),
                int(rng.gen_range(1..=10_000)),
                Value::text(astring(&mut rng, 14, 24)),
                money(rng.gen_range(100..=10_000)),
                Value::text(astring(&mut rng, 26, 50)),
            ],
        );
    }

    for w in 1..=p.warehouses {
        push(
            "warehouse",
            vec![
                int(w),
                Value::text(astring(&mut rng, 6, 10)),
                Value::text(astring(&mut rng, 10, 20)),
                Value::text(astring(&mut rng, 10, 20)),
                Value::text(astring(&mut rng, 2, 2).to_uppercase()),
                Value::text(nstring(&mut rng, 4) + "11111"),
                Value::Float(rng.gen_range(0..=2000) as f64 / 10_000.0),
                money(30_000_000),
            ],
        );
        for s in 1..=p.items {
            push(
                "stock",
                vec![
                    int(s),
                    int(w),
                    int(rng.gen_range(10..=100)),
                    Value::text(astring(&mut rng, 24, 24)),
                    int(0),
                    int(0),
                    int(0),
                    Value::text(astring(&mut rng, 26, 50)),
                ],
            );
        }
        for d in 1..=p.districts_per_warehouse {
            // one slot per order a customer will place, shuffled into o_id order
            let mut slots = Vec::new();
            for c in 1..=p.customers_per_district {
                let k = rng.gen_range(p.orders_per_customer.0..=p.orders_per_customer.1);
                slots.extend(std::iter::repeat(c).take(k as usize));
            }
            slots.shuffle(&mut rng);
            let n_orders = slots.len() as u32;
            let undelivered_from = n_orders - n_orders * 3 / 10 + 1;

            push(
                "district",
                vec![
                    int(d as i16),
                    int(w as i16),
                    Value::text(astring(&mut rng, 6, 10)),
                    Value::text(astring(&mut rng, 10, 20)),
                    Value::text(astring(&mut rng, 10, 20)),
                    Value::text(astring(&mut rng, 2, 2).to_uppercase()),
                    Value::text(nstring(&mut rng, 4) + "11111"),
                    Value::Float(rng.gen_range(0..=2000) as f64 / 10_000.0),
                    money(3_000_000),
                    int(n_orders + 1),
                ],
            );

            for c in 1..=p.customers_per_district {
                let since = rng.gen_range(0..86_400);
                push(
                    "customer",
                    vec![
                        int(c),
                        int(d),
                        int(w),
                        Value::text(astring(&mut rng, 8, 16)),
                        Value::text("OE"),
                        Value::text(last_name(rng.gen_range(0..15))),
                        Value::text(astring(&mut rng, 10, 20)),
                        Value::text(astring(&mut rng, 10, 20)),
                        Value::text(astring(&mut rng, 2, 2).to_uppercase()),
                        Value::text(nstring(&mut rng, 4) + "11111"),
                        Value::text(nstring(&mut rng, 16)),
                        ts(since),
                        Value::text(if rng.gen_bool(0.1) { "BC" } else { "GC" }),
                        money(5_000_000),
                        Value::Float(rng.gen_range(0..=5000) as f64 / 10_000.0),
                        money(rng.gen_range(-100_000..=100_000)),
                        money(1000),
                        int(1),
                        int(0),
                        Value::text(astring(&mut rng, 30, 60)),
                    ],
                );
                push(
                    "history",
                    vec![
                        int(c),
                        int(d),
                        int(w),
                        int(d),
                        int(w),
                        ts(since),
                        money(1000),
                        Value::text(astring(&mut rng, 12, 24)),
                    ],
                );
            }

            for (i, &c) in slots.iter().enumerate() {
                let o = i as u32 + 1;
                let entry = o as i64 * 600 + rng.gen_range(0..600);
                let delivered = o < undelivered_from;
                let ol_cnt = rng.gen_range(5..=10u32);
                push(
                    "orders",
                    vec![
                        int(o),
                        int(d),
                        int(w),
                        int(c),
                        ts(entry),
                        if delivered { int(rng.gen_range(1..=10)) } else { Value::Null },
                        int(ol_cnt),
                        int(1),
                    ],
                );
                if !delivered {
                    push("new_order", vec![int(o), int(d), int(w)]);
                }
                for n in 1..=ol_cnt {
                    push(
                        "order_line",
                        vec![
                            int(o),
                            int(d),
                            int(w),
                            int(n),
                            int(rng.gen_range(1..=p.items)),
                            int(w),
                            if delivered { ts(entry + 3600) } else { Value::Null },
                            int(5),
                            money(rng.gen_range(1..=999_999)),
                            Value::text(astring(&mut rng, 24, 24)),
                        ],
                    );
                }
            }
        }
    }
    TpccData { params: *p, tables }
}
