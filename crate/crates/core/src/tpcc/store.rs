//! Backend layouts of the generated data and the foreign-table DDL mapping
//! them back to the relational TPC-C schema.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use indexmap::IndexMap;

use super::gen::{Table, TpccData};
use crate::catalog::{ServerDef, StoreKind};
use crate::keyexpr::zfill;
use crate::relmodel::{format_float, format_timestamp, Document, ScalarType, Value};
use crate::sqlfront::render;
use crate::sqlfront::CreateForeignTable;
use crate::stores::{object_path, ColumnFamily, DocCollection, StoreError};

pub const DOC_SERVER: &str = "ymdbserver";
pub const WIDE_SERVER: &str = "cassserver";
pub const DOC_SCHEMA: &str = "ymdb";
pub const WIDE_SCHEMA: &str = "cass";

/// Width of each zero-padded key component in the wide-column layout.
pub const KEY_WIDTH: usize = 5;

/// Text form of a value as both stores keep it. `None` for Null: the field
/// or cell is left out.
pub fn store_text(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => return None,
        Value::Text(s) => s.clone(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        Value::Timestamp(t) => format_timestamp(*t),
        other => other.to_plain_string(),
    })
}

fn doc_of(t: &Table, row: &[Value], skip: &[&str]) -> Document {
    let mut d = Document::new();
    for (c, v) in t.columns.iter().zip(row) {
        if skip.contains(&c.name.as_str()) {
            continue;
        }
        if let Some(s) = store_text(v) {
            d.insert(c.name.to_uppercase(), Value::Text(s));
        }
    }
    d
}

fn int_at(row: &[Value], i: usize) -> i64 {
    match row[i] {
        Value::Int(n) => n,
        ref v => panic!("expected an integer, got {v}"),
    }
}

/// Document layout: CUSTOMER embeds ORDERS (each embedding ORDER_LINE) and
/// HISTORY; every other table is a flat collection of its own.
pub fn docstore_collections(data: &TpccData) -> Vec<DocCollection> {
    let cust = data.table("customer");
    let orders = data.table("orders");
    let lines = data.table("order_line");
    let hist = data.table("history");

    let mut lines_of: HashMap<(i64, i64, i64), Vec<Value>> = HashMap::new();
    for r in &lines.rows {
        let doc = doc_of(lines, r, &["ol_o_id", "ol_d_id", "ol_w_id"]);
        lines_of.entry((int_at(r, 2), int_at(r, 1), int_at(r, 0))).or_default().push(Value::Document(doc));
    }
    let mut orders_of: HashMap<(i64, i64, i64), Vec<Value>> = HashMap::new();
    for r in &orders.rows {
        let mut doc = doc_of(orders, r, &["o_d_id", "o_w_id", "o_c_id"]);
        let ls = lines_of.remove(&(int_at(r, 2), int_at(r, 1), int_at(r, 0))).unwrap_or_default();
        doc.insert("ORDER_LINE".into(), Value::Array(ls));
        orders_of.entry((int_at(r, 2), int_at(r, 1), int_at(r, 3))).or_default().push(Value::Document(doc));
    }
    let mut hist_of: HashMap<(i64, i64, i64), Vec<Value>> = HashMap::new();
    for r in &hist.rows {
        let doc = doc_of(hist, r, &["h_c_id", "h_c_d_id", "h_c_w_id"]);
        hist_of.entry((int_at(r, 2), int_at(r, 1), int_at(r, 0))).or_default().push(Value::Document(doc));
    }

    let mut customers = DocCollection::new("CUSTOMER");
    for r in &cust.rows {
        let k = (int_at(r, 2), int_at(r, 1), int_at(r, 0));
        let mut doc = doc_of(cust, r, &[]);
        doc.insert("ORDERS".into(), Value::Array(orders_of.remove(&k).unwrap_or_default()));
        doc.insert("HISTORY".into(), Value::Array(hist_of.remove(&k).unwrap_or_default()));
        customers.push(doc).expect("generated ids are unique");
    }

    let mut out = vec![customers];
    for name in ["warehouse", "district", "new_order", "item", "stock"] {
        let t = data.table(name);
        let mut c = DocCollection::new(&name.to_uppercase());
        for r in &t.rows {
            c.push(doc_of(t, r, &[])).expect("generated ids are unique");
        }
        out.push(c);
    }
    out
}

/// Zero-padded concatenation of the key columns of `row`.
pub fn row_key(t: &Table, row: &[Value]) -> String {
    t.key
        .iter()
        .map(|k| zfill(&store_text(&row[t.col(k)]).unwrap_or_default(), KEY_WIDTH))
        .collect()
}

/// Wide-column layout: one column family per table, qualifiers named after
/// the columns.
pub fn widecolumn_families(data: &TpccData) -> Vec<ColumnFamily> {
    data.tables
        .values()
        .map(|t| {
            let mut cf = ColumnFamily::new(t.name, t.columns.iter().map(|c| c.name.clone()).collect());
            for r in &t.rows {
                let cells: BTreeMap<String, String> = t
                    .columns
                    .iter()
                    .zip(r)
                    .filter_map(|(c, v)| store_text(v).map(|s| (c.name.clone(), s)))
                    .collect();
                cf.rows.insert(row_key(t, r), cells);
            }
            cf
        })
        .collect()
}

pub fn write_docstore(data: &TpccData, dir: &Path) -> Result<(), StoreError> {
    for c in docstore_collections(data) {
        c.write_jsonl(&object_path(dir, StoreKind::Docstore, &c.name))?;
    }
    Ok(())
}

pub fn write_widecolumn(data: &TpccData, dir: &Path) -> Result<(), StoreError> {
    for cf in widecolumn_families(data) {
        cf.write_csv(&object_path(dir, StoreKind::Widecolumn, &cf.name))?;
    }
    Ok(())
}

pub fn doc_server(dir: &Path) -> ServerDef {
    let mut s = ServerDef::new(DOC_SERVER, StoreKind::Docstore, &dir.display().to_string());
    s.options.insert("db".into(), "tpcc".into());
    s
}

pub fn wide_server(dir: &Path) -> ServerDef {
    ServerDef::new(WIDE_SERVER, StoreKind::Widecolumn, &dir.display().to_string())
}

fn create(schema: &str, table: &str, columns: Vec<(String, ScalarType, Option<(&str, String)>)>, server: &str, options: &[(&str, String)]) -> String {
    let c = CreateForeignTable {
        name: crate::sqlfront::ObjectName::new(Some(schema), table),
        columns: columns
            .into_iter()
            .map(|(n, ty, opt)| {
                let mut cd = crate::relmodel::ColumnDef::new(&n, ty);
                if let Some((k, v)) = opt {
                    cd.options.insert(k.to_string(), v);
                }
                cd
            })
            .collect(),
        server: server.to_string(),
        options: options.iter().map(|(k, v)| (k.to_string(), v.clone())).collect::<IndexMap<_, _>>(),
    };
    render::create_foreign_table(&c)
}

/// Document field path of a column in the nested layout. Parent keys are
/// read from the enclosing document.
fn doc_path(table: &str, column: &str) -> String {
    let up = column.to_uppercase();
    match column {
        "o_c_id" | "h_c_id" => "C_ID".into(),
        "o_d_id" | "ol_d_id" | "h_c_d_id" => "C_D_ID".into(),
        "o_w_id" | "ol_w_id" | "h_c_w_id" => "C_W_ID".into(),
        "ol_o_id" => "ORDERS.O_ID".into(),
        _ => match table {
            "orders" => format!("ORDERS.{up}"),
            "order_line" => format!("ORDERS.ORDER_LINE.{up}"),
            "history" => format!("HISTORY.{up}"),
            _ => up,
        },
    }
}

/// DDL registering the document layout under schema `ymdb`.
pub fn docstore_ddl(data: &TpccData) -> String {
    let mut out = String::new();
    for t in data.tables.values() {
        let cols = t
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.ty, Some(("mname", doc_path(t.name, &c.name)))))
            .collect();
        let (coll, pipe) = match t.name {
            "customer" => ("CUSTOMER", None),
            "orders" => ("CUSTOMER", Some(r#"[{"$unwind": "$ORDERS"}]"#)),
            "order_line" => (
                "CUSTOMER",
                Some(r#"[{"$unwind": "$ORDERS"}, {"$unwind": "$ORDERS.ORDER_LINE"}]"#),
            ),
            "history" => ("CUSTOMER", Some(r#"[{"$unwind": "$HISTORY"}]"#)),
            other => (match other {
                "warehouse" => "WAREHOUSE",
                "district" => "DISTRICT",
                "new_order" => "NEW_ORDER",
                "item" => "ITEM",
                _ => "STOCK",
            }, None),
        };
        let mut opts = vec![("collection", coll.to_string()), ("db", "tpcc".to_string())];
        if let Some(p) = pipe {
            opts.push(("pipe", p.to_string()));
        }
        out.push_str(&create(DOC_SCHEMA, t.name, cols, DOC_SERVER, &opts));
        out.push_str(";\n");
    }
    out
}

/// Composite key option value for the key columns of `t`.
pub fn composite_spec(t: &Table) -> String {
    let parts: Vec<String> = t.key.iter().map(|k| format!("str({k}).zfill({KEY_WIDTH})")).collect();
    format!("{}:{}", t.key.join(","), parts.join("+"))
}

/// Retypes the district key columns and declares the composite row key.
pub const DISTRICT_ALTER: &str = "ALTER FOREIGN TABLE cass.district
  ALTER COLUMN key OPTIONS (composite
   'd_id,d_w_id:str(d_id).zfill(5)+str(d_w_id).zfill(5)'),
  ALTER COLUMN d_id TYPE SMALLINT,
  ALTER COLUMN d_w_id TYPE SMALLINT;";

/// DDL registering the wide-column layout under schema `cass`. The district
/// table is created with text key columns and then altered.
pub fn widecolumn_ddl(data: &TpccData) -> String {
    let mut out = String::new();
    for t in data.tables.values() {
        let district = t.name == "district";
        let key_opt = if district { None } else { Some(("composite", composite_spec(t))) };
        let mut cols = vec![("key".to_string(), ScalarType::Text, key_opt)];
        for c in &t.columns {
            let ty = if district && t.key.contains(&c.name.as_str()) { ScalarType::Text } else { c.ty };
            cols.push((c.name.clone(), ty, None));
        }
        out.push_str(&create(WIDE_SCHEMA, t.name, cols, WIDE_SERVER, &[("cf", t.name.to_string())]));
        out.push_str(";\n");
    }
    out.push_str(DISTRICT_ALTER);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpcc::gen::{generate, TpccParams};

    fn data() -> TpccData {
        generate(&TpccParams {
            items: 20,
            districts_per_warehouse: 2,
            customers_per_district: 4,
            ..TpccParams::new(1, 3)
        })
    }

    #[test]
    fn docstore_nesting() {
        let d = data();
        let colls = docstore_collections(&d);
        let names: Vec<&str> = colls.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["CUSTOMER", "WAREHOUSE", "DISTRICT", "NEW_ORDER", "ITEM", "STOCK"]);
        let cust = &colls[0];
        assert_eq!(cust.docs.len(), 8);
        let n_orders: usize = cust.docs.iter().map(|c| match &c["ORDERS"] {
            Value::Array(a) => a.len(),
            _ => 0,
        }).sum();
        assert_eq!(n_orders, d.table("orders").rows.len());
        let Value::Array(os) = &cust.docs[0]["ORDERS"] else { panic!() };
        let Value::Document(o) = &os[0] else { panic!() };
        assert!(o.contains_key("O_ID") && !o.contains_key("O_C_ID"));
        assert!(matches!(o["ORDER_LINE"], Value::Array(ref l) if !l.is_empty()));
        // every scalar is text
        assert!(matches!(o["O_ENTRY_D"], Value::Text(_)));
        assert!(matches!(cust.docs[0]["C_BALANCE"], Value::Text(_)));
    }

    #[test]
    fn widecolumn_keys() {
        let d = data();
        let cfs = widecolumn_families(&d);
        assert_eq!(cfs.len(), 9);
        let district = cfs.iter().find(|c| c.name == "district").unwrap();
        let row = district.get("0000100001").unwrap();
        assert_eq!(row["d_id"], "1");
        assert_eq!(row["d_w_id"], "1");
        let ol = cfs.iter().find(|c| c.name == "order_line").unwrap();
        assert_eq!(ol.rows.len(), d.table("order_line").rows.len());
        assert!(ol.get("00001000010000100001").is_some());
    }

    #[test]
    fn store_text_forms() {
        assert_eq!(store_text(&Value::Float(12.5)).unwrap(), "12.5");
        assert_eq!(store_text(&Value::Float(-3.0)).unwrap(), "-3");
        assert_eq!(store_text(&Value::Timestamp(0)).unwrap(), "1970-01-01 00:00:00");
        assert_eq!(store_text(&Value::Null), None);
    }

    #[test]
    fn ddl_parses() {
        let d = data();
        let doc = crate::sqlfront::parse_statements(&docstore_ddl(&d)).unwrap();
        assert_eq!(doc.len(), 9);
        let wide = crate::sqlfront::parse_statements(&widecolumn_ddl(&d)).unwrap();
        assert_eq!(wide.len(), 10);
        assert_eq!(doc_path("order_line", "ol_number"), "ORDERS.ORDER_LINE.OL_NUMBER");
        assert_eq!(doc_path("orders", "o_w_id"), "C_W_ID");
        assert_eq!(doc_path("history", "h_amount"), "HISTORY.H_AMOUNT");
        assert_eq!(doc_path("district", "d_next_o_id"), "D_NEXT_O_ID");
    }
}
