//! SQL dialect front-end: queries, foreign-table DDL and materialized-view
//! statements. Parsing is hand-written recursive descent; rendering is the
//! exact inverse on ASTs.

pub mod arbitrary;
pub mod ast;
mod lexer;
mod parser;
pub mod render;

use std::fmt;

pub use ast::*;
pub use parser::{parse_statement as parse, parse_statements};

/// Whether `buf` ends with a `;` that closes a statement, as opposed to one
/// inside a string literal or comment. Used to find statement boundaries in
/// line-oriented input.
pub fn ends_statement(buf: &str) -> bool {
    match lexer::tokenize(buf) {
        Ok(toks) => toks.len() >= 2 && toks[toks.len() - 2].tok == lexer::Tok::Semicolon,
        // let the parser report the lexical error once the line looks finished
        Err(_) => buf.trim_end().ends_with(';') && buf.matches('\'').count() % 2 == 0,
    }
}

/// Words that cannot be used as unquoted identifiers.
pub const RESERVED: &[&str] = &[
    "all", "alter", "and", "as", "asc", "by", "create", "desc", "distinct", "drop", "explain", "false", "from",
    "group", "having", "in", "inner", "is", "join", "limit", "not", "null", "on", "or", "order", "select", "true",
    "where",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    ReservedWord,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub token: String,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, token: &str, message: &str) -> Self {
        ParseError {
            kind: ParseErrorKind::Syntax,
            line,
            col,
            token: token.to_string(),
            message: message.to_string(),
        }
    }

    pub(crate) fn reserved(line: usize, col: usize, word: &str) -> Self {
        ParseError {
            kind: ParseErrorKind::ReservedWord,
            line,
            col,
            token: word.to_string(),
            message: format!("reserved word {} cannot be used as an identifier (quote it)", word.to_ascii_uppercase()),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {} (at {})", self.line, self.col, self.message, self.token)
    }
}

/// Renders a statement as SQL text; `parse(&render(s)) == s`.
pub fn render(stmt: &Statement) -> String {
    render::statement(stmt)
}
