use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Catalog, CatalogError, ForeignTableDef, MatViewDef, ServerDef};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    format_version: u64,
    #[serde(default)]
    schemas: Vec<String>,
    #[serde(default)]
    servers: Vec<ServerDef>,
    #[serde(default)]
    tables: Vec<ForeignTableDef>,
    #[serde(default)]
    views: Vec<MatViewDef>,
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn parse_error(text: &str, e: serde_json::Error) -> CatalogError {
    CatalogError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

impl Catalog {
    pub fn to_text(&self) -> String {
        let file = CatalogFile {
            format_version: FORMAT_VERSION,
            schemas: self.schemas.iter().cloned().collect(),
            servers: self.servers.values().cloned().collect(),
            tables: self.tables.values().cloned().collect(),
            views: self.views.values().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("catalog serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Catalog, CatalogError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
        let found = raw.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0);
        if found != FORMAT_VERSION {
            return Err(CatalogError::Version {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
        let mut cat = Catalog::new();
        for s in &file.schemas {
            cat.add_schema(s);
        }
        for s in file.servers {
            cat.add_server(s)?;
        }
        for t in file.tables {
            cat.create_table(t)?;
        }
        for v in file.views {
            cat.add_view(v)?;
        }
        Ok(cat)
    }

    /// Writes the catalog through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        let io = |e: std::io::Error| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_text()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        let text = fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Catalog::from_text(&text)
    }
}
