//! Registry of servers, foreign tables and materialized views. DDL is
//! applied to a copy and committed only after validation.

mod persist;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyexpr::{CompositeKeySpec, KeyExprError};
use crate::relmodel::{ColumnDef, ModelError, Options, RelSchema};
use crate::sqlfront::{AlterAction, CreateForeignTable, ObjectName, OptionChange, Statement};
use crate::stores::pipeline::Pipe;

pub use persist::FORMAT_VERSION;

/// Schema searched for unqualified relation names.
pub const DEFAULT_SCHEMA: &str = "public";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QualifiedName {
    pub schema: String,
    pub name: String,
}

impl QualifiedName {
    pub fn new(schema: &str, name: &str) -> Self {
        QualifiedName {
            schema: schema.to_string(),
            name: name.to_string(),
        }
    }

    pub fn resolve(obj: &ObjectName) -> Self {
        QualifiedName::new(obj.schema.as_deref().unwrap_or(DEFAULT_SCHEMA), &obj.name)
    }

    /// Parses `schema.table` or a bare `table`.
    pub fn parse(s: &str) -> Self {
        match s.split_once('.') {
            Some((schema, name)) => QualifiedName::new(schema, name),
            None => QualifiedName::new(DEFAULT_SCHEMA, s),
        }
    }

    pub fn to_object_name(&self) -> ObjectName {
        ObjectName::new(Some(&self.schema), &self.name)
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.schema, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    Docstore,
    Widecolumn,
    Kv,
}

impl StoreKind {
    pub fn parse(s: &str) -> Option<StoreKind> {
        Some(match s {
            "docstore" => StoreKind::Docstore,
            "widecolumn" => StoreKind::Widecolumn,
            "kv" => StoreKind::Kv,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StoreKind::Docstore => "docstore",
            StoreKind::Widecolumn => "widecolumn",
            StoreKind::Kv => "kv",
        }
    }

    /// Schema registered when the first server of this kind is added.
    pub fn default_schema(self) -> &'static str {
        match self {
            StoreKind::Docstore => "ymdb",
            StoreKind::Widecolumn => "cass",
            StoreKind::Kv => "kv",
        }
    }
}

impl fmt::Display for StoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerDef {
    pub name: String,
    pub kind: StoreKind,
    /// Connection options, stored verbatim. `data` names the data directory.
    #[serde(default)]
    pub options: Options,
}

impl ServerDef {
    pub fn new(name: &str, kind: StoreKind, data_dir: &str) -> Self {
        let mut options = Options::new();
        options.insert("data".into(), data_dir.to_string());
        ServerDef {
            name: name.to_string(),
            kind,
            options,
        }
    }

    pub fn data_dir(&self) -> Option<&str> {
        self.options.get("data").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeignTableDef {
    pub name: QualifiedName,
    pub server: String,
    pub schema: RelSchema,
    #[serde(default)]
    pub options: Options,
}

impl ForeignTableDef {
    /// Index and parsed spec of the column carrying a `composite` option.
    pub fn composite_key(&self) -> Option<(usize, CompositeKeySpec)> {
        self.schema
            .columns()
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.options.get("composite").map(|s| (i, s)))
            .and_then(|(i, s)| CompositeKeySpec::parse(s).ok().map(|spec| (i, spec)))
    }

    pub fn pipe(&self) -> Option<Pipe> {
        self.options.get("pipe").and_then(|p| Pipe::parse(p).ok())
    }

    /// Store-side object backing the table: the `collection` (docstore, kv),
    /// `cf` (widecolumn) option, the `aggregate` name of an envelope `pipe`,
    /// or the table name.
    pub fn source_name(&self) -> String {
        self.options
            .get("collection")
            .or_else(|| self.options.get("cf"))
            .cloned()
            .or_else(|| self.pipe().and_then(|p| p.collection))
            .unwrap_or_else(|| self.name.name.clone())
    }

    pub fn to_create(&self) -> CreateForeignTable {
        CreateForeignTable {
            name: self.name.to_object_name(),
            columns: self.schema.columns().to_vec(),
            server: self.server.clone(),
            options: self.options.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatViewDef {
    pub name: QualifiedName,
    /// Defining query, as rendered SQL.
    pub query: String,
    pub columns: Vec<ColumnDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_every_secs: Option<u64>,
    #[serde(default)]
    pub depends_on: Vec<QualifiedName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_refreshed: Option<i64>,
}

#[derive(Debug, Clone, Copy)]
pub enum Relation<'a> {
    Table(&'a ForeignTableDef),
    View(&'a MatViewDef),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("server {0} already exists")]
    DuplicateServer(String),
    #[error("unknown server {0}")]
    UnknownServer(String),
    #[error("relation {0} already exists")]
    Duplicate(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("table {table} has no column {column}")]
    UnknownColumn { table: String, column: String },
    #[error("invalid value for option {option}: {message}")]
    InvalidOption { option: String, message: String },
    #[error(transparent)]
    Schema(#[from] ModelError),
    #[error("cannot drop {name}: referenced by {}", dependents.join(", "))]
    Dependency { name: String, dependents: Vec<String> },
    #[error("statement is not catalog DDL")]
    NotDdl,
    #[error("server {server} still has tables: {}", tables.join(", "))]
    ServerInUse { server: String, tables: Vec<String> },
    #[error("catalog file {path}: {message}")]
    Io { path: String, message: String },
    #[error("catalog format version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("catalog parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

fn invalid(option: &str, message: impl fmt::Display) -> CatalogError {
    CatalogError::InvalidOption {
        option: option.to_string(),
        message: message.to_string(),
    }
}

/// Schemas are namespaces only: creating a relation in a new schema
/// registers it.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    schemas: BTreeSet<String>,
    servers: BTreeMap<String, ServerDef>,
    tables: BTreeMap<QualifiedName, ForeignTableDef>,
    views: BTreeMap<QualifiedName, MatViewDef>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            schemas: BTreeSet::from([DEFAULT_SCHEMA.to_string()]),
            servers: BTreeMap::new(),
            tables: BTreeMap::new(),
            views: BTreeMap::new(),
        }
    }
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// Registers the server and its kind's default schema.
    pub fn add_server(&mut self, server: ServerDef) -> Result<(), CatalogError> {
        if self.servers.contains_key(&server.name) {
            return Err(CatalogError::DuplicateServer(server.name));
        }
        self.schemas.insert(server.kind.default_schema().to_string());
        self.servers.insert(server.name.clone(), server);
        Ok(())
    }

    pub fn add_schema(&mut self, name: &str) {
        self.schemas.insert(name.to_string());
    }

    pub fn schemas(&self) -> impl Iterator<Item = &str> {
        self.schemas.iter().map(String::as_str)
    }

    pub fn remove_server(&mut self, name: &str) -> Result<ServerDef, CatalogError> {
        let tables: Vec<String> = self.tables.values().filter(|t| t.server == name).map(|t| t.name.to_string()).collect();
        if !tables.is_empty() {
            return Err(CatalogError::ServerInUse { server: name.to_string(), tables });
        }
        self.servers.remove(name).ok_or_else(|| CatalogError::UnknownServer(name.to_string()))
    }

    pub fn server(&self, name: &str) -> Result<&ServerDef, CatalogError> {
        self.servers.get(name).ok_or_else(|| CatalogError::UnknownServer(name.to_string()))
    }

    pub fn servers(&self) -> impl Iterator<Item = &ServerDef> {
        self.servers.values()
    }

    pub fn tables(&self) -> impl Iterator<Item = &ForeignTableDef> {
        self.tables.values()
    }

    pub fn views(&self) -> impl Iterator<Item = &MatViewDef> {
        self.views.values()
    }

    pub fn table(&self, name: &QualifiedName) -> Option<&ForeignTableDef> {
        self.tables.get(name)
    }

    pub fn view(&self, name: &QualifiedName) -> Option<&MatViewDef> {
        self.views.get(name)
    }

    pub fn view_mut(&mut self, name: &QualifiedName) -> Option<&mut MatViewDef> {
        self.views.get_mut(name)
    }

    /// Looks a relation up; unqualified names search [`DEFAULT_SCHEMA`].
    pub fn resolve(&self, name: &ObjectName) -> Result<Relation<'_>, CatalogError> {
        let q = QualifiedName::resolve(name);
        if let Some(t) = self.tables.get(&q) {
            return Ok(Relation::Table(t));
        }
        if let Some(v) = self.views.get(&q) {
            return Ok(Relation::View(v));
        }
        Err(CatalogError::UnknownRelation(q.to_string()))
    }

    fn exists(&self, q: &QualifiedName) -> bool {
        self.tables.contains_key(q) || self.views.contains_key(q)
    }

    fn dependents_of(&self, q: &QualifiedName) -> Vec<String> {
        self.views
            .values()
            .filter(|v| v.depends_on.contains(q))
            .map(|v| v.name.to_string())
            .collect()
    }

    fn validate_table(&self, t: &ForeignTableDef) -> Result<(), CatalogError> {
        let server = self.server(&t.server)?;
        if let Some(p) = t.options.get("pipe") {
            if server.kind != StoreKind::Docstore {
                return Err(invalid("pipe", format!("{} servers do not accept pipeline fragments", server.kind)));
            }
            Pipe::parse(p).map_err(|e| invalid("pipe", e))?;
        }
        let mut composite = None;
        for c in t.schema.columns() {
            if let Some(spec) = c.options.get("composite") {
                if composite.is_some() {
                    return Err(invalid("composite", "only one column may carry a composite key"));
                }
                let spec = CompositeKeySpec::parse(spec).map_err(|e: KeyExprError| invalid("composite", e))?;
                for col in &spec.columns {
                    if t.schema.index_of(col).is_none() {
                        return Err(invalid("composite", format!("column {col} does not exist in {}", t.name)));
                    }
                    if *col == c.name {
                        return Err(invalid("composite", "a key column cannot be computed from itself"));
                    }
                }
                composite = Some(spec);
            }
        }
        Ok(())
    }

    /// Registers a table definition after validation.
    pub fn create_table(&mut self, def: ForeignTableDef) -> Result<(), CatalogError> {
        if self.exists(&def.name) {
            return Err(CatalogError::Duplicate(def.name.to_string()));
        }
        self.validate_table(&def)?;
        self.schemas.insert(def.name.schema.clone());
        self.tables.insert(def.name.clone(), def);
        Ok(())
    }

    /// Applies CREATE/ALTER/DROP FOREIGN TABLE; returns a one-line summary.
    pub fn apply_ddl(&mut self, stmt: &Statement) -> Result<String, CatalogError> {
        match stmt {
            Statement::CreateForeignTable(c) => {
                let def = ForeignTableDef {
                    name: QualifiedName::resolve(&c.name),
                    server: c.server.clone(),
                    schema: RelSchema::new(c.columns.clone())?,
                    options: c.options.clone(),
                };
                let summary = format!("CREATE FOREIGN TABLE {} ({} columns)", def.name, def.schema.len());
                self.create_table(def)?;
                Ok(summary)
            }
            Statement::AlterForeignTable(a) => {
                let q = QualifiedName::resolve(&a.name);
                let mut def = self.tables.get(&q).cloned().ok_or_else(|| CatalogError::UnknownRelation(q.to_string()))?;
                let mut cols = def.schema.columns().to_vec();
                for action in &a.actions {
                    apply_action(&q, &mut cols, &mut def.options, action)?;
                }
                def.schema = RelSchema::new(cols)?;
                self.validate_table(&def)?;
                self.tables.insert(q.clone(), def);
                Ok(format!("ALTER FOREIGN TABLE {q} ({} changes)", a.actions.len()))
            }
            Statement::DropForeignTable(n) => {
                let q = QualifiedName::resolve(n);
                if !self.tables.contains_key(&q) {
                    return Err(CatalogError::UnknownRelation(q.to_string()));
                }
                let dependents = self.dependents_of(&q);
                if !dependents.is_empty() {
                    return Err(CatalogError::Dependency { name: q.to_string(), dependents });
                }
                self.tables.remove(&q);
                Ok(format!("DROP FOREIGN TABLE {q}"))
            }
            _ => Err(CatalogError::NotDdl),
        }
    }

    pub fn add_view(&mut self, def: MatViewDef) -> Result<(), CatalogError> {
        if self.exists(&def.name) {
            return Err(CatalogError::Duplicate(def.name.to_string()));
        }
        if let Some(missing) = def.depends_on.iter().find(|d| !self.exists(d)) {
            return Err(CatalogError::UnknownRelation(missing.to_string()));
        }
        self.schemas.insert(def.name.schema.clone());
        self.views.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn remove_view(&mut self, name: &QualifiedName) -> Result<MatViewDef, CatalogError> {
        if !self.views.contains_key(name) {
            return Err(CatalogError::UnknownRelation(name.to_string()));
        }
        let dependents = self.dependents_of(name);
        if !dependents.is_empty() {
            return Err(CatalogError::Dependency { name: name.to_string(), dependents });
        }
        Ok(self.views.remove(name).expect("checked above"))
    }
}

fn merge_options(target: &mut Options, changes: &[OptionChange]) -> Result<(), CatalogError> {
    for ch in changes {
        match ch {
            OptionChange::Set(k, v) => {
                target.insert(k.clone(), v.clone());
            }
            OptionChange::Drop(k) => {
                if target.shift_remove(k).is_none() {
                    return Err(invalid(k, "option is not set"));
                }
            }
        }
    }
    Ok(())
}

fn apply_action(table: &QualifiedName, cols: &mut Vec<ColumnDef>, opts: &mut Options, action: &AlterAction) -> Result<(), CatalogError> {
    let find = |cols: &mut Vec<ColumnDef>, name: &str| -> Result<usize, CatalogError> {
        cols.iter().position(|c| c.name == name).ok_or_else(|| CatalogError::UnknownColumn {
            table: table.to_string(),
            column: name.to_string(),
        })
    };
    match action {
        AlterAction::ColumnOptions { column, changes } => {
            let i = find(cols, column)?;
            merge_options(&mut cols[i].options, changes)
        }
        AlterAction::ColumnType { column, ty } => {
            let i = find(cols, column)?;
            cols[i].ty = *ty;
            Ok(())
        }
        AlterAction::AddColumn(c) => {
            cols.push(c.clone());
            Ok(())
        }
        AlterAction::DropColumn(column) => {
            let i = find(cols, column)?;
            cols.remove(i);
            Ok(())
        }
        AlterAction::TableOptions(changes) => merge_options(opts, changes),
    }
}
