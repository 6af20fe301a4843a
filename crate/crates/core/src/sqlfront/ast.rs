use crate::accum::AggFunc;
use crate::relmodel::{ColumnDef, Options, ScalarType, Value};

/// Possibly schema-qualified relation name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectName {
    pub schema: Option<String>,
    pub name: String,
}

impl ObjectName {
    pub fn new(schema: Option<&str>, name: &str) -> Self {
        ObjectName {
            schema: schema.map(str::to_string),
            name: name.to_string(),
        }
    }

    pub fn bare(name: &str) -> Self {
        ObjectName::new(None, name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Select(Query),
    Explain(Query),
    CreateForeignTable(CreateForeignTable),
    AlterForeignTable(AlterForeignTable),
    DropForeignTable(ObjectName),
    ImportForeignSchema(ImportForeignSchema),
    CreateMaterializedView {
        name: ObjectName,
        query: Query,
        refresh_every_secs: Option<u64>,
    },
    RefreshMaterializedView(ObjectName),
    DropMaterializedView(ObjectName),
}

impl Statement {
    pub fn is_ddl(&self) -> bool {
        matches!(
            self,
            Statement::CreateForeignTable(_)
                | Statement::AlterForeignTable(_)
                | Statement::DropForeignTable(_)
                | Statement::ImportForeignSchema(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateForeignTable {
    pub name: ObjectName,
    pub columns: Vec<ColumnDef>,
    pub server: String,
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlterForeignTable {
    pub name: ObjectName,
    pub actions: Vec<AlterAction>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlterAction {
    ColumnOptions { column: String, changes: Vec<OptionChange> },
    ColumnType { column: String, ty: ScalarType },
    AddColumn(ColumnDef),
    DropColumn(String),
    TableOptions(Vec<OptionChange>),
}

/// One entry of an ALTER ... OPTIONS list. A bare, `ADD` or `SET` entry all
/// merge the value in.
#[derive(Debug, Clone, PartialEq)]
pub enum OptionChange {
    Set(String, String),
    Drop(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportForeignSchema {
    pub remote_schema: String,
    pub server: String,
    pub into: String,
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Query {
    pub distinct: bool,
    pub projection: Vec<SelectItem>,
    pub from: Vec<TableWithJoins>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderByItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(String),
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableWithJoins {
    pub relation: TableRef,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub name: ObjectName,
    pub alias: Option<String>,
}

impl TableRef {
    /// Name by which columns of this relation are qualified in the query.
    pub fn visible_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name.name)
    }
}

/// `[INNER] JOIN relation ON condition`.
#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub relation: TableRef,
    pub on: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderByItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
    Plus,
    Minus,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::NotEq => "<>",
            BinOp::Lt => "<",
            BinOp::LtEq => "<=",
            BinOp::Gt => ">",
            BinOp::GtEq => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
            BinOp::Plus => "+",
            BinOp::Minus => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::NotEq | BinOp::Lt | BinOp::LtEq | BinOp::Gt | BinOp::GtEq)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Plus | BinOp::Minus | BinOp::Mul | BinOp::Div)
    }

    /// The comparison obtained by swapping operands (`a < b` == `b > a`).
    pub fn flip(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::LtEq => BinOp::GtEq,
            BinOp::Gt => BinOp::Lt,
            BinOp::GtEq => BinOp::LtEq,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column { table: Option<String>, name: String },
    Literal(Value),
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Not(Box<Expr>),
    Neg(Box<Expr>),
    InList { expr: Box<Expr>, list: Vec<Expr>, negated: bool },
    IsNull { expr: Box<Expr>, negated: bool },
    /// Aggregate call; `arg` is `None` only for `COUNT(*)`.
    Agg { func: AggFunc, arg: Option<Box<Expr>> },
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Column { table: None, name: name.to_string() }
    }

    pub fn qcol(table: &str, name: &str) -> Expr {
        Expr::Column {
            table: Some(table.to_string()),
            name: name.to_string(),
        }
    }

    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Literal(v.into())
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn and(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinOp::And, left, right)
    }

    pub fn eq(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinOp::Eq, left, right)
    }

    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Agg { .. }));
        found
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Binary { left, right, .. } => {
                left.walk(f);
                right.walk(f);
            }
            Expr::Not(e) | Expr::Neg(e) | Expr::IsNull { expr: e, .. } => e.walk(f),
            Expr::InList { expr, list, .. } => {
                expr.walk(f);
                for e in list {
                    e.walk(f);
                }
            }
            Expr::Agg { arg: Some(a), .. } => a.walk(f),
            _ => {}
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}
