//! In-process store emulators backed by files in a server's data directory,
//! and the wrappers that expose them to the mediator.

pub mod docstore;
pub mod kv;
pub mod pipeline;
pub mod widecolumn;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use thiserror::Error;

use crate::catalog::{ServerDef, StoreKind};
use crate::relmodel::{from_json, to_json, Document, Value};
use crate::wrapper::Wrapper;

pub use docstore::DocWrapper;
pub use kv::KvWrapper;
pub use widecolumn::WideColumnWrapper;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("pipeline: {0}")]
    Pipeline(String),
    #[error("conversion failed: {0}")]
    Convert(String),
    #[error("{table}: row {key}: column {column}: {message}")]
    Coerce { table: String, key: String, column: String, message: String },
    #[error("{0}")]
    Unsupported(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Documents of one collection in load order, each with a unique `_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocCollection {
    pub name: String,
    pub docs: Vec<Document>,
    /// `_id`s of `docs`, kept by `push` and `read_jsonl`.
    ids: HashSet<Value>,
}

impl DocCollection {
    pub fn new(name: &str) -> Self {
        DocCollection {
            name: name.to_string(),
            docs: Vec::new(),
            ids: HashSet::new(),
        }
    }

    /// Appends a document, assigning `_id = "oid:<n>"` (first field) when
    /// absent.
    pub fn push(&mut self, mut doc: Document) -> Result<(), String> {
        if !doc.contains_key("_id") {
            let mut n = self.docs.len() + 1;
            while self.ids.contains(&Value::text(format!("oid:{n}"))) {
                n += 1;
            }
            doc.insert("_id".into(), Value::text(format!("oid:{n}")));
            doc.move_index(doc.len() - 1, 0);
        }
        if !self.ids.insert(doc["_id"].clone()) {
            return Err(format!("duplicate _id {}", doc["_id"]));
        }
        self.docs.push(doc);
        Ok(())
    }

    /// Reads newline-delimited JSON objects; blank lines are skipped.
    pub fn read_jsonl(name: &str, path: &Path) -> Result<DocCollection, StoreError> {
        let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut coll = DocCollection::new(name);
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let perr = |message: String| StoreError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let j: serde_json::Value = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
            let Value::Document(mut doc) = from_json(&j) else {
                return Err(perr("expected a JSON object".into()));
            };
            let id = match doc.get("_id") {
                Some(id) => id.clone(),
                None => {
                    let id = Value::text(format!("oid:{}", coll.docs.len() + 1));
                    doc.insert("_id".into(), id.clone());
                    doc.move_index(doc.len() - 1, 0);
                    id
                }
            };
            if !coll.ids.insert(id.clone()) {
                return Err(perr(format!("duplicate _id {id}")));
            }
            coll.docs.push(doc);
        }
        Ok(coll)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), StoreError> {
        let mut out = String::new();
        for d in &self.docs {
            out.push_str(&serde_json::Value::Object(d.iter().map(|(k, v)| (k.clone(), to_json(v))).collect()).to_string());
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Rows of one column family: key → qualifier → text cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnFamily {
    pub name: String,
    /// Qualifiers in header order (without `key`).
    pub qualifiers: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, String>>,
}

impl ColumnFamily {
    pub fn new(name: &str, qualifiers: Vec<String>) -> Self {
        ColumnFamily {
            name: name.to_string(),
            qualifiers,
            rows: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&BTreeMap<String, String>> {
        self.rows.get(key)
    }

    pub fn scan(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, String>)> {
        self.rows.iter()
    }

    /// CSV with a header row containing `key`; an empty cell means the
    /// qualifier is absent from that row.
    pub fn read_csv(name: &str, path: &Path) -> Result<ColumnFamily, StoreError> {
        let (header, records) = read_csv(path)?;
        let key_at = header.iter().position(|h| h == "key").ok_or_else(|| StoreError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "header has no key column".into(),
        })?;
        let qualifiers: Vec<String> = header.iter().enumerate().filter(|(i, _)| *i != key_at).map(|(_, h)| h.clone()).collect();
        let mut cf = ColumnFamily::new(name, qualifiers);
        for (line, rec) in records {
            let mut cells = BTreeMap::new();
            for (i, cell) in rec.iter().enumerate() {
                if i != key_at && !cell.is_empty() {
                    cells.insert(header[i].clone(), cell.to_string());
                }
            }
            if cf.rows.insert(rec[key_at].to_string(), cells).is_some() {
                return Err(StoreError::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("duplicate key {}", &rec[key_at]),
                });
            }
        }
        Ok(cf)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["key"];
        header.extend(self.qualifiers.iter().map(String::as_str));
        w.write_record(&header).map_err(|e| io_err(path, e))?;
        for (k, cells) in &self.rows {
            let mut rec = vec![k.as_str()];
            rec.extend(self.qualifiers.iter().map(|q| cells.get(q).map(String::as_str).unwrap_or("")));
            w.write_record(&rec).map_err(|e| io_err(path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
        write_atomic(path, &bytes)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvNamespace {
    pub name: String,
    pub entries: BTreeMap<String, String>,
}

impl KvNamespace {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn scan(&self) -> impl Iterator<Item = (&String, &String)> {
        self.entries.iter()
    }

    /// CSV with header `key,value`.
    pub fn read_csv(name: &str, path: &Path) -> Result<KvNamespace, StoreError> {
        let (header, records) = read_csv(path)?;
        if header != ["key", "value"] {
            return Err(StoreError::Parse {
                path: path.display().to_string(),
                line: 1,
                message: "header must be key,value".into(),
            });
        }
        let mut ns = KvNamespace {
            name: name.to_string(),
            entries: BTreeMap::new(),
        };
        for (line, rec) in records {
            if ns.entries.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
                return Err(StoreError::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("duplicate key {}", &rec[0]),
                });
            }
        }
        Ok(ns)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), StoreError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "value"]).map_err(|e| io_err(path, e))?;
        for (k, v) in &self.entries {
            w.write_record([k, v]).map_err(|e| io_err(path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
        write_atomic(path, &bytes)
    }
}

type CsvRecords = Vec<(usize, csv::StringRecord)>;

fn read_csv(path: &Path) -> Result<(Vec<String>, CsvRecords), StoreError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(f);
    let perr = |line: usize, e: csv::Error| StoreError::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    };
    let header: Vec<String> = r.headers().map_err(|e| perr(1, e))?.iter().map(str::to_string).collect();
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            perr(line, e)
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push((line, rec));
    }
    Ok((header, records))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("part");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Parsed store files, reloaded when a file's size or mtime changes.
pub(crate) struct FileCache<T> {
    entries: Mutex<HashMap<PathBuf, (Option<SystemTime>, u64, Arc<T>)>>,
}

impl<T> Default for FileCache<T> {
    fn default() -> Self {
        FileCache {
            entries: Mutex::new(HashMap::new()),
        }
    }
}

impl<T> FileCache<T> {
    pub(crate) fn get(&self, path: &Path, load: impl FnOnce(&Path) -> Result<T, StoreError>) -> Result<Arc<T>, StoreError> {
        let meta = fs::metadata(path).map_err(|e| io_err(path, e))?;
        let stamp = (meta.modified().ok(), meta.len());
        let mut entries = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        if let Some((m, l, v)) = entries.get(path) {
            if (*m, *l) == stamp {
                return Ok(v.clone());
            }
        }
        let v = Arc::new(load(path)?);
        entries.insert(path.to_path_buf(), (stamp.0, stamp.1, v.clone()));
        Ok(v)
    }
}

/// Base names of the files in `dir` with extension `ext`, sorted.
pub(crate) fn list_objects(dir: &Path, ext: &str) -> Result<Vec<String>, StoreError> {
    let rd = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut names = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        if p.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// File holding store object `name` of a server of the given kind.
pub fn object_path(dir: &Path, kind: StoreKind, name: &str) -> PathBuf {
    let ext = match kind {
        StoreKind::Docstore => "jsonl",
        StoreKind::Widecolumn | StoreKind::Kv => "csv",
    };
    dir.join(format!("{name}.{ext}"))
}

/// Wrapper instance for a registered server.
pub fn wrapper_for(server: &ServerDef) -> Result<Arc<dyn Wrapper>, StoreError> {
    let dir = PathBuf::from(server.data_dir().ok_or_else(|| StoreError::Io {
        path: server.name.clone(),
        message: "server has no data directory".into(),
    })?);
    Ok(match server.kind {
        StoreKind::Docstore => Arc::new(DocWrapper::new(dir, server.options.get("db").cloned())),
        StoreKind::Widecolumn => Arc::new(WideColumnWrapper::new(dir)),
        StoreKind::Kv => Arc::new(KvWrapper::new(dir)),
    })
}

/// Validates `file` as a store object of `kind` and installs it as `name`
/// in `dir`. Returns the number of documents, rows or entries.
pub fn load_object(dir: &Path, kind: StoreKind, name: &str, file: &Path) -> Result<usize, StoreError> {
    let target = object_path(dir, kind, name);
    let n = match kind {
        StoreKind::Docstore => {
            let c = DocCollection::read_jsonl(name, file)?;
            c.write_jsonl(&target)?;
            c.docs.len()
        }
        StoreKind::Widecolumn => {
            let cf = ColumnFamily::read_csv(name, file)?;
            cf.write_csv(&target)?;
            cf.rows.len()
        }
        StoreKind::Kv => {
            let ns = KvNamespace::read_csv(name, file)?;
            ns.write_csv(&target)?;
            ns.entries.len()
        }
    };
    Ok(n)
}
