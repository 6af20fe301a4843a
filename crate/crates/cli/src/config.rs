use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Table,
    Tsv,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    /// Directory holding the catalog file (`catalog.json`) and view snapshots.
    pub state_dir: PathBuf,
    /// Parent of per-server data directories when `server add` has no `--data`.
    pub data_dir: PathBuf,
    pub output: OutputMode,
    pub bind_join_threshold: Option<f64>,
}

/// Keys accepted in the optional TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    state_dir: Option<PathBuf>,
    data_dir: Option<PathBuf>,
    output: Option<OutputMode>,
    bind_join_threshold: Option<f64>,
}

/// Command-line values; each one overrides the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub state_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub output: Option<OutputMode>,
    pub bind_join_threshold: Option<f64>,
}

impl CliConfig {
    pub fn resolve(o: Overrides) -> Result<CliConfig, CliError> {
        let file = match &o.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::User(format!("{}: {e}", p.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| CliError::User(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let state_dir = o
            .state_dir
            .or(file.state_dir)
            .or_else(|| std::env::var_os("POLYQE_HOME").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(".polyqe"));
        let data_dir = o.data_dir.or(file.data_dir).unwrap_or_else(|| state_dir.join("data"));
        let bind_join_threshold = o.bind_join_threshold.or(file.bind_join_threshold);
        if bind_join_threshold.is_some_and(|t| t.is_nan() || t < 0.0) {
            return Err(CliError::User("bind_join_threshold must be a non-negative number".into()));
        }
        Ok(CliConfig {
            state_dir,
            data_dir,
            output: o.output.or(file.output).unwrap_or(OutputMode::Table),
            bind_join_threshold,
        })
    }
}

pub fn ensure_dir(p: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::User(format!("cannot create {}: {e}", p.display())))?;
    p.canonicalize().map_err(|e| CliError::User(format!("{}: {e}", p.display())))
}
