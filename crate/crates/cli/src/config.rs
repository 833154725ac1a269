//! Settings from the command line, environment and an optional TOML file.
//!
//! Precedence: flag or environment variable, then the file, then defaults.
//! Relative paths in the file are taken relative to the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use lingeval_core::{Format, SignificanceConfig};

use crate::error::{AppError, AppResult};

pub const DEFAULT_STORE: &str = ".lingeval";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub critical_z: Option<f64>,
    pub format: Option<String>,
    pub bind: Option<String>,
    pub annotator: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> AppResult<FileConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.store, &mut cfg.suite, &mut cfg.ui_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub store: PathBuf,
    pub suite: Option<PathBuf>,
    pub significance: SignificanceConfig,
    pub format: Format,
    pub bind: String,
    pub annotator: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub critical_z: Option<f64>,
    pub annotator: Option<String>,
}

impl Config {
    pub fn resolve(o: &Overrides) -> AppResult<Config> {
        let file = match &o.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let critical_z = o
            .critical_z
            .or(file.critical_z)
            .unwrap_or(lingeval_core::stats::DEFAULT_CRITICAL_Z);
        let format = match &file.format {
            Some(f) => f.parse().map_err(AppError::usage)?,
            None => Format::Plain,
        };
        Ok(Config {
            store: o
                .store
                .clone()
                .or(file.store)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
            suite: file.suite,
            significance: SignificanceConfig::new(critical_z).map_err(AppError::usage)?,
            format,
            bind: file.bind.unwrap_or_else(|| DEFAULT_BIND.to_owned()),
            annotator: o.annotator.clone().or(file.annotator),
            ui_dir: file.ui_dir,
        })
    }
}
