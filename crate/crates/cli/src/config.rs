//! `key = value` run configuration files. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "net",
    "log",
    "measure",
    "measures",
    "method",
    "n0",
    "max-iter",
    "delta",
    "seed",
    "coverage",
    "max-level",
    "prob-floor",
    "state-cap",
    "max-trace-len",
    "temd-timeout",
    "out-net",
    "out-report",
    "out-convergence",
    "case-column",
    "activity-column",
    "time-column",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    /// Directory relative paths are resolved against.
    base: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", n + 1);
            };
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", n + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values, base: None })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        config.base = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let p = PathBuf::from(self.values.get(key)?);
        Some(match &self.base {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        })
    }
}

/// The flag if given, else the config value.
pub fn pick<T: FromStr>(flag: Option<T>, config: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(key),
    }
}

pub fn pick_path(flag: Option<PathBuf>, config: &ConfigFile, key: &str) -> Option<PathBuf> {
    flag.or_else(|| config.path(key))
}
