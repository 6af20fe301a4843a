use std::fmt::Write;

use crate::accum::AggFunc;
use crate::relmodel::{quote_text, ColumnDef, Options, Value};

use super::ast::*;
use super::RESERVED;

/// Renders an identifier, quoting it when it would not read back unchanged.
pub fn ident(name: &str) -> String {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c == '_')
        && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !RESERVED.contains(&name);
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

pub fn object_name(n: &ObjectName) -> String {
    match &n.schema {
        Some(s) => format!("{}.{}", ident(s), ident(&n.name)),
        None => ident(&n.name),
    }
}

fn options(opts: &Options) -> String {
    let items: Vec<String> = opts.iter().map(|(k, v)| format!("{} {}", ident(k), quote_text(v))).collect();
    format!("OPTIONS ({})", items.join(", "))
}

fn option_changes(changes: &[OptionChange]) -> String {
    let items: Vec<String> = changes
        .iter()
        .map(|c| match c {
            OptionChange::Set(k, v) => format!("{} {}", ident(k), quote_text(v)),
            OptionChange::Drop(k) => format!("DROP {}", ident(k)),
        })
        .collect();
    format!("OPTIONS ({})", items.join(", "))
}

fn column_def(c: &ColumnDef) -> String {
    let mut s = format!("{} {}", ident(&c.name), c.ty.sql_name());
    if !c.options.is_empty() {
        s.push(' ');
        s.push_str(&options(&c.options));
    }
    s
}

pub fn statement(stmt: &Statement) -> String {
    match stmt {
        Statement::Select(q) => query(q),
        Statement::Explain(q) => format!("EXPLAIN {}", query(q)),
        Statement::CreateForeignTable(c) => create_foreign_table(c),
        Statement::AlterForeignTable(a) => {
            let actions: Vec<String> = a
                .actions
                .iter()
                .map(|act| match act {
                    AlterAction::ColumnOptions { column, changes } => {
                        format!("ALTER COLUMN {} {}", ident(column), option_changes(changes))
                    }
                    AlterAction::ColumnType { column, ty } => {
                        format!("ALTER COLUMN {} TYPE {}", ident(column), ty.sql_name())
                    }
                    AlterAction::AddColumn(c) => format!("ADD COLUMN {}", column_def(c)),
                    AlterAction::DropColumn(c) => format!("DROP COLUMN {}", ident(c)),
                    AlterAction::TableOptions(changes) => option_changes(changes),
                })
                .collect();
            format!("ALTER FOREIGN TABLE {}\n  {}", object_name(&a.name), actions.join(",\n  "))
        }
        Statement::DropForeignTable(n) => format!("DROP FOREIGN TABLE {}", object_name(n)),
        Statement::ImportForeignSchema(i) => {
            let mut s = format!(
                "IMPORT FOREIGN SCHEMA {} FROM SERVER {} INTO {}",
                ident(&i.remote_schema),
                ident(&i.server),
                ident(&i.into)
            );
            if !i.options.is_empty() {
                s.push(' ');
                s.push_str(&options(&i.options));
            }
            s
        }
        Statement::CreateMaterializedView {
            name,
            query: q,
            refresh_every_secs,
        } => {
            let mut s = format!("CREATE MATERIALIZED VIEW {} AS {}", object_name(name), query(q));
            if let Some(n) = refresh_every_secs {
                let _ = write!(s, " REFRESH EVERY {n} SECONDS");
            }
            s
        }
        Statement::RefreshMaterializedView(n) => format!("REFRESH MATERIALIZED VIEW {}", object_name(n)),
        Statement::DropMaterializedView(n) => format!("DROP MATERIALIZED VIEW {}", object_name(n)),
    }
}

pub fn create_foreign_table(c: &CreateForeignTable) -> String {
    let cols: Vec<String> = c.columns.iter().map(column_def).collect();
    let mut s = format!(
        "CREATE FOREIGN TABLE {} (\n  {}\n)\nSERVER {}",
        object_name(&c.name),
        cols.join(",\n  "),
        ident(&c.server)
    );
    if !c.options.is_empty() {
        s.push('\n');
        s.push_str(&options(&c.options));
    }
    s
}

fn table_ref(t: &TableRef) -> String {
    match &t.alias {
        Some(a) => format!("{} AS {}", object_name(&t.name), ident(a)),
        None => object_name(&t.name),
    }
}

pub fn query(q: &Query) -> String {
    let mut s = String::from("SELECT ");
    if q.distinct {
        s.push_str("DISTINCT ");
    }
    let items: Vec<String> = q
        .projection
        .iter()
        .map(|item| match item {
            SelectItem::Wildcard => "*".to_string(),
            SelectItem::QualifiedWildcard(t) => format!("{}.*", ident(t)),
            SelectItem::Expr { expr: e, alias: Some(a) } => format!("{} AS {}", expr(e), ident(a)),
            SelectItem::Expr { expr: e, alias: None } => expr(e),
        })
        .collect();
    s.push_str(&items.join(", "));
    if !q.from.is_empty() {
        let froms: Vec<String> = q
            .from
            .iter()
            .map(|twj| {
                let mut f = table_ref(&twj.relation);
                for j in &twj.joins {
                    let _ = write!(f, " JOIN {} ON {}", table_ref(&j.relation), expr(&j.on));
                }
                f
            })
            .collect();
        let _ = write!(s, " FROM {}", froms.join(", "));
    }
    if let Some(w) = &q.selection {
        let _ = write!(s, " WHERE {}", expr(w));
    }
    if !q.group_by.is_empty() {
        let g: Vec<String> = q.group_by.iter().map(expr).collect();
        let _ = write!(s, " GROUP BY {}", g.join(", "));
    }
    if let Some(h) = &q.having {
        let _ = write!(s, " HAVING {}", expr(h));
    }
    if !q.order_by.is_empty() {
        let o: Vec<String> = q
            .order_by
            .iter()
            .map(|o| if o.desc { format!("{} DESC", expr(&o.expr)) } else { expr(&o.expr) })
            .collect();
        let _ = write!(s, " ORDER BY {}", o.join(", "));
    }
    if let Some(n) = q.limit {
        let _ = write!(s, " LIMIT {n}");
    }
    s
}

fn is_atomic(e: &Expr) -> bool {
    match e {
        Expr::Column { .. } | Expr::Agg { .. } => true,
        // a negative literal operand reads back as the same literal
        Expr::Literal(_) => true,
        _ => false,
    }
}

fn operand(e: &Expr) -> String {
    if is_atomic(e) {
        expr(e)
    } else {
        format!("({})", expr(e))
    }
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Column { table: Some(t), name } => format!("{}.{}", ident(t), ident(name)),
        Expr::Column { table: None, name } => ident(name),
        Expr::Literal(v) => literal(v),
        Expr::Binary { op, left, right } => format!("{} {} {}", operand(left), op.symbol(), operand(right)),
        Expr::Not(inner) => format!("NOT {}", operand(inner)),
        Expr::Neg(inner) => format!("-({})", expr(inner)),
        Expr::InList { expr: inner, list, negated } => {
            let items: Vec<String> = list.iter().map(expr).collect();
            format!(
                "{} {}IN ({})",
                operand(inner),
                if *negated { "NOT " } else { "" },
                items.join(", ")
            )
        }
        Expr::IsNull { expr: inner, negated } => {
            format!("{} IS {}NULL", operand(inner), if *negated { "NOT " } else { "" })
        }
        Expr::Agg { func, arg } => match (func, arg) {
            (AggFunc::CountStar, _) | (_, None) => "COUNT(*)".to_string(),
            (AggFunc::CountDistinct, Some(a)) => format!("COUNT(DISTINCT {})", expr(a)),
            (f, Some(a)) => format!("{}({})", f.name().to_ascii_uppercase(), expr(a)),
        },
    }
}

pub fn literal(v: &Value) -> String {
    v.to_string()
}
