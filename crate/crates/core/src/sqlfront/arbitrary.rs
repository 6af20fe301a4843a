//! Random ASTs in parser-normal form, for round-trip testing.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ast::*;
use crate::accum::AggFunc;
use crate::relmodel::{ColumnDef, Options, ScalarType, Value};

const IDENTS: &[&str] = &[
    "a", "b", "c_1", "t", "orders", "_p", "refresh", "Mixed", "select", "with space", "q\"t", "x9", "key",
];

const TEXTS: &[&str] = &["", "Braga", "it's", "a\"b", "line\nbreak", "ação", "%_", "0000100002"];

fn ident(rng: &mut impl Rng) -> String {
    IDENTS.choose(rng).expect("nonempty").to_string()
}

fn object_name(rng: &mut impl Rng) -> ObjectName {
    ObjectName {
        schema: rng.gen_bool(0.5).then(|| ident(rng)),
        name: ident(rng),
    }
}

fn literal(rng: &mut impl Rng) -> Value {
    match rng.gen_range(0..7) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::Int(match rng.gen_range(0..4) {
            0 => i64::MIN,
            1 => i64::MAX,
            _ => rng.gen_range(-1000..1000),
        }),
        3 => {
            let f = match rng.gen_range(0..3) {
                0 => rng.gen_range(-1e6..1e6),
                1 => f64::from_bits(rng.gen()),
                _ => rng.gen_range(-40..40) as f64 * 0.25,
            };
            Value::Float(if f.is_finite() { f } else { 0.5 })
        }
        4 => {
            let secs = rng.gen_range(0..4_102_444_800i64);
            let micros = if rng.gen() { 0 } else { rng.gen_range(0..1_000_000) };
            Value::Timestamp(secs * 1_000_000 + micros)
        }
        _ => Value::text(*TEXTS.choose(rng).expect("nonempty")),
    }
}

fn column(rng: &mut impl Rng) -> Expr {
    Expr::Column {
        table: rng.gen_bool(0.4).then(|| ident(rng)),
        name: ident(rng),
    }
}

const OPS: [BinOp; 12] = [
    BinOp::Eq,
    BinOp::NotEq,
    BinOp::Lt,
    BinOp::LtEq,
    BinOp::Gt,
    BinOp::GtEq,
    BinOp::And,
    BinOp::Or,
    BinOp::Plus,
    BinOp::Minus,
    BinOp::Mul,
    BinOp::Div,
];

/// A scalar expression; aggregate calls appear only when `aggs` is set and
/// never nest.
pub fn expr(rng: &mut impl Rng, depth: u32, aggs: bool) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..if aggs { 3 } else { 2 }) {
            0 => column(rng),
            1 => Expr::Literal(literal(rng)),
            _ => agg(rng, depth),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 | 1 => Expr::binary(*OPS.choose(rng).expect("nonempty"), expr(rng, d, aggs), expr(rng, d, aggs)),
        2 => Expr::Not(Box::new(expr(rng, d, aggs))),
        3 => Expr::Neg(Box::new(expr(rng, d, aggs))),
        4 => Expr::InList {
            expr: Box::new(expr(rng, d, aggs)),
            list: (0..rng.gen_range(1..4)).map(|_| expr(rng, d, aggs)).collect(),
            negated: rng.gen(),
        },
        _ => Expr::IsNull {
            expr: Box::new(expr(rng, d, aggs)),
            negated: rng.gen(),
        },
    }
}

fn agg(rng: &mut impl Rng, depth: u32) -> Expr {
    let func = *[
        AggFunc::CountStar,
        AggFunc::Count,
        AggFunc::CountDistinct,
        AggFunc::Sum,
        AggFunc::Avg,
        AggFunc::Min,
        AggFunc::Max,
    ]
    .choose(rng)
    .expect("nonempty");
    let arg = (func != AggFunc::CountStar).then(|| Box::new(expr(rng, depth.saturating_sub(1), false)));
    Expr::Agg { func, arg }
}

fn table_ref(rng: &mut impl Rng) -> TableRef {
    TableRef {
        name: object_name(rng),
        alias: rng.gen_bool(0.5).then(|| ident(rng)),
    }
}

pub fn query(rng: &mut impl Rng) -> Query {
    let grouped = rng.gen_bool(0.3);
    let projection = (0..rng.gen_range(1..4))
        .map(|_| match rng.gen_range(0..8) {
            0 => SelectItem::Wildcard,
            1 => SelectItem::QualifiedWildcard(ident(rng)),
            _ => SelectItem::Expr {
                expr: expr(rng, 3, grouped),
                alias: rng.gen_bool(0.4).then(|| ident(rng)),
            },
        })
        .collect();
    let from = (0..rng.gen_range(0..3))
        .map(|_| TableWithJoins {
            relation: table_ref(rng),
            joins: (0..rng.gen_range(0..3))
                .map(|_| Join {
                    relation: table_ref(rng),
                    on: expr(rng, 2, false),
                })
                .collect(),
        })
        .collect();
    let group_by: Vec<Expr> = if grouped { (0..rng.gen_range(1..3)).map(|_| column(rng)).collect() } else { Vec::new() };
    Query {
        distinct: rng.gen_bool(0.2),
        projection,
        from,
        selection: rng.gen_bool(0.6).then(|| expr(rng, 3, false)),
        having: (grouped && rng.gen_bool(0.5)).then(|| expr(rng, 2, true)),
        group_by,
        order_by: (0..rng.gen_range(0..3))
            .map(|_| OrderByItem {
                expr: expr(rng, 2, grouped),
                desc: rng.gen(),
            })
            .collect(),
        limit: rng.gen_bool(0.3).then(|| rng.gen_range(0..1_000_000)),
    }
}

fn options(rng: &mut impl Rng, max: usize) -> Options {
    let mut o = Options::new();
    for _ in 0..rng.gen_range(0..=max) {
        o.insert(ident(rng), TEXTS.choose(rng).expect("nonempty").to_string());
    }
    o
}

fn ty(rng: &mut impl Rng) -> ScalarType {
    *ScalarType::ALL.choose(rng).expect("nonempty")
}

fn column_def(rng: &mut impl Rng) -> ColumnDef {
    ColumnDef {
        name: ident(rng),
        ty: ty(rng),
        options: options(rng, 2),
    }
}

fn option_changes(rng: &mut impl Rng) -> Vec<OptionChange> {
    (0..rng.gen_range(1..4))
        .map(|_| {
            if rng.gen_bool(0.3) {
                OptionChange::Drop(ident(rng))
            } else {
                OptionChange::Set(ident(rng), TEXTS.choose(rng).expect("nonempty").to_string())
            }
        })
        .collect()
}

pub fn statement(rng: &mut impl Rng) -> Statement {
    match rng.gen_range(0..10) {
        0..=2 => Statement::Select(query(rng)),
        3 => Statement::Explain(query(rng)),
        4 => Statement::CreateForeignTable(CreateForeignTable {
            name: object_name(rng),
            columns: (0..rng.gen_range(1..5)).map(|_| column_def(rng)).collect(),
            server: ident(rng),
            options: options(rng, 3),
        }),
        5 => Statement::AlterForeignTable(AlterForeignTable {
            name: object_name(rng),
            actions: (0..rng.gen_range(1..4))
                .map(|_| match rng.gen_range(0..5) {
                    0 => AlterAction::ColumnOptions {
                        column: ident(rng),
                        changes: option_changes(rng),
                    },
                    1 => AlterAction::ColumnType {
                        column: ident(rng),
                        ty: ty(rng),
                    },
                    2 => AlterAction::AddColumn(column_def(rng)),
                    3 => AlterAction::DropColumn(ident(rng)),
                    _ => AlterAction::TableOptions(option_changes(rng)),
                })
                .collect(),
        }),
        6 => match rng.gen_range(0..3) {
            0 => Statement::DropForeignTable(object_name(rng)),
            1 => Statement::DropMaterializedView(object_name(rng)),
            _ => Statement::RefreshMaterializedView(object_name(rng)),
        },
        7 => Statement::ImportForeignSchema(ImportForeignSchema {
            remote_schema: ident(rng),
            server: ident(rng),
            into: ident(rng),
            options: options(rng, 2),
        }),
        _ => Statement::CreateMaterializedView {
            name: object_name(rng),
            query: query(rng),
            refresh_every_secs: rng.gen_bool(0.5).then(|| rng.gen_range(1..100_000)),
        },
    }
}
