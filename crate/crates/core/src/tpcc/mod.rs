//! TPC-C at desk scale: data generation, the two store layouts, a reference
//! oracle and the Stock-Level / Order-Status read transactions issued as
//! mediator SQL.

pub mod gen;
pub mod oracle;
pub mod store;
pub mod workload;

use std::path::Path;

pub use gen::{generate, TpccData, TpccParams};
pub use oracle::Oracle;
pub use workload::{draw, run_batch, run_tx, ExecMode, TxRun};

use crate::catalog::Catalog;
use crate::engine::{Engine, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Docstore,
    Widecolumn,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Docstore, Backend::Widecolumn];

    /// Schema the backend's foreign tables are registered under.
    pub fn schema(self) -> &'static str {
        match self {
            Backend::Docstore => store::DOC_SCHEMA,
            Backend::Widecolumn => store::WIDE_SCHEMA,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Docstore => "docstore",
            Backend::Widecolumn => "widecolumn",
        }
    }

    pub fn parse(s: &str) -> Option<Backend> {
        match s {
            "docstore" => Some(Backend::Docstore),
            "widecolumn" => Some(Backend::Widecolumn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CustomerSel {
    Id(i64),
    LastName(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tx {
    StockLevel { w: i64, d: i64, threshold: i64 },
    OrderStatus { w: i64, d: i64, customer: CustomerSel },
}

impl Tx {
    pub fn kind(&self) -> &'static str {
        match self {
            Tx::StockLevel { .. } => "stock-level",
            Tx::OrderStatus { .. } => "order-status",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineStatus {
    pub i_id: i64,
    pub supply_w_id: i64,
    pub quantity: i64,
    pub amount: f64,
    pub delivery_d: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStatus {
    pub c_id: i64,
    pub c_first: String,
    pub c_middle: String,
    pub c_last: String,
    pub c_balance: f64,
    pub o_id: i64,
    pub o_entry_d: i64,
    pub o_carrier_id: Option<i64>,
    pub lines: Vec<LineStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TxResult {
    StockLevel(i64),
    OrderStatus(OrderStatus),
}

impl TxResult {
    /// Exact comparison: floats must agree bit for bit.
    pub fn bit_eq(&self, o: &TxResult) -> bool {
        match (self, o) {
            (TxResult::StockLevel(a), TxResult::StockLevel(b)) => a == b,
            (TxResult::OrderStatus(a), TxResult::OrderStatus(b)) => {
                a == b
                    && a.c_balance.to_bits() == b.c_balance.to_bits()
                    && a.lines.iter().zip(&b.lines).all(|(x, y)| x.amount.to_bits() == y.amount.to_bits())
            }
            _ => false,
        }
    }
}

/// Writes both store layouts under `root` (`root/docstore`,
/// `root/widecolumn`) and returns an in-memory engine with both schemas
/// registered.
pub fn setup(data: &TpccData, root: &Path) -> Result<Engine, Error> {
    let doc_dir = root.join("docstore");
    let wide_dir = root.join("widecolumn");
    store::write_docstore(data, &doc_dir)?;
    store::write_widecolumn(data, &wide_dir)?;
    let engine = Engine::new(Catalog::new());
    register(&engine, data, &doc_dir, &wide_dir)?;
    Ok(engine)
}

/// Registers the two servers and their foreign tables in `engine`.
pub fn register(engine: &Engine, data: &TpccData, doc_dir: &Path, wide_dir: &Path) -> Result<(), Error> {
    engine.add_server(store::doc_server(doc_dir))?;
    engine.add_server(store::wide_server(wide_dir))?;
    engine.execute_script(&store::docstore_ddl(data))?;
    engine.execute_script(&store::widecolumn_ddl(data))?;
    Ok(())
}
