use crate::accum::AggFunc;
use crate::relmodel::{parse_timestamp, ColumnDef, Options, ScalarType, Value};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, RESERVED};

pub fn parse_statements(sql: &str) -> Result<Vec<Statement>, ParseError> {
    let mut p = Parser::new(sql)?;
    let mut out = Vec::new();
    loop {
        while p.eat(&Tok::Semicolon) {}
        if p.peek() == &Tok::Eof {
            break;
        }
        out.push(p.statement()?);
        if p.peek() != &Tok::Eof && !p.eat(&Tok::Semicolon) {
            return Err(p.unexpected("';' or end of input"));
        }
    }
    Ok(out)
}

pub fn parse_statement(sql: &str) -> Result<Statement, ParseError> {
    let mut p = Parser::new(sql)?;
    let stmt = p.statement()?;
    while p.eat(&Tok::Semicolon) {}
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of statement"));
    }
    Ok(stmt)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(sql: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(sql)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::syntax(t.line, t.col, &t.tok.describe(), &format!("expected {wanted}"))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Word { text, quoted: false } if text == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&kw.to_ascii_uppercase()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let t = self.toks[self.pos].clone();
        match t.tok {
            Tok::Word { text, quoted: true } => {
                self.advance();
                Ok(text)
            }
            Tok::Word { text, quoted: false } => {
                if RESERVED.contains(&text.as_str()) {
                    return Err(ParseError::reserved(t.line, t.col, &text));
                }
                self.advance();
                Ok(text)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// True if the next token can start an identifier (used for optional
    /// aliases).
    fn at_ident(&self) -> bool {
        match self.peek() {
            Tok::Word { quoted: true, .. } => true,
            // `refresh` ends a view definition and is never taken as an alias
            Tok::Word { text, quoted: false } => !RESERVED.contains(&text.as_str()) && text != "refresh",
            _ => false,
        }
    }

    fn object_name(&mut self) -> Result<ObjectName, ParseError> {
        let first = self.ident()?;
        if self.eat(&Tok::Dot) {
            let second = self.ident()?;
            Ok(ObjectName {
                schema: Some(first),
                name: second,
            })
        } else {
            Ok(ObjectName { schema: None, name: first })
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.advance() {
            Tok::Str(s) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("string literal"))
            }
        }
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        if let Tok::Number(n) = self.peek().clone() {
            if let Ok(v) = n.parse::<u64>() {
                self.advance();
                return Ok(v);
            }
        }
        Err(self.unexpected("non-negative integer"))
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        if self.is_kw("select") {
            return Ok(Statement::Select(self.query()?));
        }
        if self.eat_kw("explain") {
            return Ok(Statement::Explain(self.query()?));
        }
        if self.eat_kw("create") {
            if self.eat_kw("foreign") {
                self.expect_kw("table")?;
                return self.create_foreign_table();
            }
            if self.eat_kw("materialized") {
                self.expect_kw("view")?;
                let name = self.object_name()?;
                self.expect_kw("as")?;
                let query = self.query()?;
                let refresh_every_secs = if self.eat_kw("refresh") {
                    self.expect_kw("every")?;
                    let n = self.uint()?;
                    if n == 0 {
                        self.pos -= 1;
                        return Err(self.unexpected("positive refresh interval"));
                    }
                    if !self.eat_kw("seconds") {
                        self.expect_kw("second")?;
                    }
                    Some(n)
                } else {
                    None
                };
                return Ok(Statement::CreateMaterializedView {
                    name,
                    query,
                    refresh_every_secs,
                });
            }
            return Err(self.unexpected("FOREIGN TABLE or MATERIALIZED VIEW"));
        }
        if self.eat_kw("alter") {
            self.expect_kw("foreign")?;
            self.expect_kw("table")?;
            return self.alter_foreign_table();
        }
        if self.eat_kw("drop") {
            if self.eat_kw("foreign") {
                self.expect_kw("table")?;
                return Ok(Statement::DropForeignTable(self.object_name()?));
            }
            if self.eat_kw("materialized") {
                self.expect_kw("view")?;
                return Ok(Statement::DropMaterializedView(self.object_name()?));
            }
            return Err(self.unexpected("FOREIGN TABLE or MATERIALIZED VIEW"));
        }
        if self.eat_kw("import") {
            self.expect_kw("foreign")?;
            self.expect_kw("schema")?;
            let remote_schema = self.ident()?;
            self.expect_kw("from")?;
            self.expect_kw("server")?;
            let server = self.ident()?;
            self.expect_kw("into")?;
            let into = self.ident()?;
            let options = if self.is_kw("options") { self.options()? } else { Options::new() };
            return Ok(Statement::ImportForeignSchema(ImportForeignSchema {
                remote_schema,
                server,
                into,
                options,
            }));
        }
        if self.eat_kw("refresh") {
            self.expect_kw("materialized")?;
            self.expect_kw("view")?;
            return Ok(Statement::RefreshMaterializedView(self.object_name()?));
        }
        Err(self.unexpected("a statement"))
    }

    /// `OPTIONS ( key 'value' [, ...] )`
    fn options(&mut self) -> Result<Options, ParseError> {
        self.expect_kw("options")?;
        self.expect(&Tok::LParen)?;
        let mut opts = Options::new();
        loop {
            let key = self.ident()?;
            let val = self.string()?;
            opts.insert(key, val);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(opts)
    }

    /// `OPTIONS ( [ADD|SET] key 'value' | DROP key [, ...] )`
    fn option_changes(&mut self) -> Result<Vec<OptionChange>, ParseError> {
        self.expect_kw("options")?;
        self.expect(&Tok::LParen)?;
        let mut out = Vec::new();
        loop {
            // `add`/`set`/`drop` are only modifiers when followed by a key
            let modifier = ["add", "set", "drop"]
                .into_iter()
                .find(|m| self.is_kw(m) && matches!(self.peek_at(1), Tok::Word { .. }));
            if let Some(m) = modifier {
                self.advance();
                let key = self.ident()?;
                if m == "drop" {
                    out.push(OptionChange::Drop(key));
                } else {
                    out.push(OptionChange::Set(key, self.string()?));
                }
            } else {
                let key = self.ident()?;
                out.push(OptionChange::Set(key, self.string()?));
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(out)
    }

    fn data_type(&mut self) -> Result<ScalarType, ParseError> {
        let t = self.toks[self.pos].clone();
        let word = match &t.tok {
            Tok::Word { text, quoted: false } => text.clone(),
            _ => return Err(self.unexpected("type name")),
        };
        self.advance();
        let ty = match word.as_str() {
            "double" => {
                self.eat_kw("precision");
                ScalarType::Double
            }
            "character" => {
                self.expect_kw("varying")?;
                ScalarType::Text
            }
            "timestamp" => {
                if self.eat_kw("without") {
                    self.expect_kw("time")?;
                    self.expect_kw("zone")?;
                } else if self.is_kw("with") {
                    return Err(self.unexpected("TIMESTAMP WITHOUT TIME ZONE (time zones are not supported)"));
                }
                ScalarType::Timestamp
            }
            w => ScalarType::from_word(w).ok_or_else(|| {
                ParseError::syntax(t.line, t.col, w, "expected type name")
            })?,
        };
        // precision / length modifiers are accepted and ignored
        if self.eat(&Tok::LParen) {
            self.uint()?;
            if self.eat(&Tok::Comma) {
                self.uint()?;
            }
            self.expect(&Tok::RParen)?;
        }
        Ok(ty)
    }

    fn column_def(&mut self) -> Result<ColumnDef, ParseError> {
        let name = self.ident()?;
        let ty = self.data_type()?;
        let options = if self.is_kw("options") { self.options()? } else { Options::new() };
        Ok(ColumnDef { name, ty, options })
    }

    fn create_foreign_table(&mut self) -> Result<Statement, ParseError> {
        let name = self.object_name()?;
        self.expect(&Tok::LParen)?;
        let mut columns = vec![self.column_def()?];
        while self.eat(&Tok::Comma) {
            columns.push(self.column_def()?);
        }
        self.expect(&Tok::RParen)?;
        self.expect_kw("server")?;
        let server = self.ident()?;
        let options = if self.is_kw("options") { self.options()? } else { Options::new() };
        Ok(Statement::CreateForeignTable(CreateForeignTable {
            name,
            columns,
            server,
            options,
        }))
    }

    fn alter_foreign_table(&mut self) -> Result<Statement, ParseError> {
        let name = self.object_name()?;
        let mut actions = Vec::new();
        loop {
            let action = if self.eat_kw("alter") {
                self.eat_kw("column");
                let column = self.ident()?;
                if self.is_kw("options") {
                    AlterAction::ColumnOptions {
                        column,
                        changes: self.option_changes()?,
                    }
                } else {
                    self.expect_kw("type")?;
                    AlterAction::ColumnType {
                        column,
                        ty: self.data_type()?,
                    }
                }
            } else if self.eat_kw("add") {
                self.eat_kw("column");
                AlterAction::AddColumn(self.column_def()?)
            } else if self.eat_kw("drop") {
                self.eat_kw("column");
                AlterAction::DropColumn(self.ident()?)
            } else if self.is_kw("options") {
                AlterAction::TableOptions(self.option_changes()?)
            } else {
                return Err(self.unexpected("ALTER COLUMN, ADD COLUMN, DROP COLUMN or OPTIONS"));
            };
            actions.push(action);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(Statement::AlterForeignTable(AlterForeignTable { name, actions }))
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let start = self.toks[self.pos].clone();
        self.expect_kw("select")?;
        let mut q = Query {
            distinct: self.eat_kw("distinct"),
            ..Query::default()
        };
        self.eat_kw("all");
        loop {
            q.projection.push(self.select_item()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if self.eat_kw("from") {
            loop {
                q.from.push(self.table_with_joins()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat_kw("where") {
            q.selection = Some(self.expr()?);
        }
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            loop {
                let t = self.toks[self.pos].clone();
                let e = self.expr()?;
                if !matches!(e, Expr::Column { .. }) {
                    return Err(ParseError::syntax(t.line, t.col, &t.tok.describe(), "GROUP BY accepts column references only"));
                }
                q.group_by.push(e);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.is_kw("having") {
            let t = self.toks[self.pos].clone();
            self.advance();
            if q.group_by.is_empty() {
                return Err(ParseError::syntax(t.line, t.col, "having", "HAVING requires GROUP BY"));
            }
            q.having = Some(self.expr()?);
        }
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_kw("desc") {
                    true
                } else {
                    self.eat_kw("asc");
                    false
                };
                q.order_by.push(OrderByItem { expr, desc });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat_kw("limit") {
            q.limit = Some(self.uint()?);
        }
        if q.projection.is_empty() {
            return Err(ParseError::syntax(start.line, start.col, "select", "empty select list"));
        }
        Ok(q)
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if self.eat(&Tok::Star) {
            return Ok(SelectItem::Wildcard);
        }
        if matches!(self.peek(), Tok::Word { .. }) && self.peek_at(1) == &Tok::Dot && self.peek_at(2) == &Tok::Star {
            let t = self.ident()?;
            self.advance();
            self.advance();
            return Ok(SelectItem::QualifiedWildcard(t));
        }
        let expr = self.expr()?;
        let alias = if self.eat_kw("as") {
            Some(self.ident()?)
        } else if self.at_ident() {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef, ParseError> {
        let name = self.object_name()?;
        let alias = if self.eat_kw("as") {
            Some(self.ident()?)
        } else if self.at_ident() {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(TableRef { name, alias })
    }

    fn table_with_joins(&mut self) -> Result<TableWithJoins, ParseError> {
        let relation = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.is_kw("inner") && self.is_kw_at(1, "join") {
                self.advance();
            } else if !self.is_kw("join") {
                break;
            }
            self.expect_kw("join")?;
            let relation = self.table_ref()?;
            self.expect_kw("on")?;
            let on = self.expr()?;
            joins.push(Join { relation, on });
        }
        Ok(TableWithJoins { relation, joins })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = Expr::binary(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = Expr::binary(BinOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => Some(BinOp::Eq),
            Tok::NotEq => Some(BinOp::NotEq),
            Tok::Lt => Some(BinOp::Lt),
            Tok::LtEq => Some(BinOp::LtEq),
            Tok::Gt => Some(BinOp::Gt),
            Tok::GtEq => Some(BinOp::GtEq),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let right = self.additive()?;
            return Ok(Expr::binary(op, left, right));
        }
        if self.is_kw("is") {
            self.advance();
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        let negated = self.is_kw("not") && self.is_kw_at(1, "in");
        if negated {
            self.advance();
        }
        if self.eat_kw("in") {
            self.expect(&Tok::LParen)?;
            let mut list = vec![self.expr()?];
            while self.eat(&Tok::Comma) {
                list.push(self.expr()?);
            }
            self.expect(&Tok::RParen)?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Plus,
                Tok::Minus => BinOp::Minus,
                _ => break,
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == &Tok::Minus {
            if let Tok::Number(n) = self.peek_at(1).clone() {
                let t = self.toks[self.pos + 1].clone();
                self.advance();
                self.advance();
                return number_literal(&format!("-{n}"), &t);
            }
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.toks[self.pos].clone();
        match t.tok.clone() {
            Tok::Number(n) => {
                self.advance();
                number_literal(&n, &t)
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Value::Text(s)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Word { text, quoted: false } => match text.as_str() {
                "null" => {
                    self.advance();
                    Ok(Expr::Literal(Value::Null))
                }
                "true" | "false" => {
                    self.advance();
                    Ok(Expr::Literal(Value::Bool(text == "true")))
                }
                "timestamp" if matches!(self.peek_at(1), Tok::Str(_)) => {
                    self.advance();
                    let s = self.string()?;
                    let ts = parse_timestamp(&s).ok_or_else(|| {
                        ParseError::syntax(t.line, t.col, &format!("'{s}'"), "invalid timestamp literal (want YYYY-MM-DD HH:MM:SS[.ffffff])")
                    })?;
                    Ok(Expr::Literal(Value::Timestamp(ts)))
                }
                "count" | "sum" | "avg" | "min" | "max" if self.peek_at(1) == &Tok::LParen => self.aggregate(&text),
                _ => self.column_ref(),
            },
            Tok::Word { quoted: true, .. } => self.column_ref(),
            _ => Err(self.unexpected("expression")),
        }
    }

    fn column_ref(&mut self) -> Result<Expr, ParseError> {
        let first = self.ident()?;
        if self.peek() == &Tok::LParen {
            return Err(self.unexpected("operator (unknown function call)"));
        }
        if self.eat(&Tok::Dot) {
            let name = self.ident()?;
            return Ok(Expr::Column {
                table: Some(first),
                name,
            });
        }
        Ok(Expr::Column { table: None, name: first })
    }

    fn aggregate(&mut self, name: &str) -> Result<Expr, ParseError> {
        self.advance();
        self.expect(&Tok::LParen)?;
        let expr = if name == "count" && self.eat(&Tok::Star) {
            Expr::Agg {
                func: AggFunc::CountStar,
                arg: None,
            }
        } else {
            let distinct = self.eat_kw("distinct");
            if distinct && name != "count" {
                return Err(self.unexpected("expression (DISTINCT is only supported in COUNT)"));
            }
            let t = self.toks[self.pos].clone();
            let arg = self.expr()?;
            if arg.contains_aggregate() {
                return Err(ParseError::syntax(t.line, t.col, &t.tok.describe(), "aggregate calls cannot be nested"));
            }
            let func = match (name, distinct) {
                ("count", true) => AggFunc::CountDistinct,
                ("count", false) => AggFunc::Count,
                ("sum", _) => AggFunc::Sum,
                ("avg", _) => AggFunc::Avg,
                ("min", _) => AggFunc::Min,
                _ => AggFunc::Max,
            };
            Expr::Agg {
                func,
                arg: Some(Box::new(arg)),
            }
        };
        self.expect(&Tok::RParen)?;
        Ok(expr)
    }
}

fn number_literal(text: &str, t: &Token) -> Result<Expr, ParseError> {
    let is_float = text.contains(['.', 'e', 'E']);
    let v = if is_float {
        text.parse::<f64>().ok().map(Value::Float)
    } else {
        text.parse::<i64>().ok().map(Value::Int)
    };
    v.map(Expr::Literal)
        .ok_or_else(|| ParseError::syntax(t.line, t.col, text, "numeric literal out of range"))
}
