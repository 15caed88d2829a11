//! Key-value text blocks: optional config files that mirror flags, and the
//! metric blocks written by evaluation and consumed by the report command.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{QcError, Result};

/// Flat key-value file: one `key<TAB>value` (or `key value`) pair per line,
/// `#` comments and blank lines ignored.
#[derive(Debug, Clone, Default)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn load(path: &Path) -> Result<KvMap> {
        let text = fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(['\t', ' ']).ok_or_else(|| QcError::Parse {
                line: idx + 1,
                message: format!("expected `key value`, got {line:?}"),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KvMap { entries })
    }

    pub fn load_optional(path: Option<&Path>) -> Result<KvMap> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(KvMap::default()),
        }
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Typed lookup; a present-but-unparseable value is an error.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| QcError::Config(format!("bad value {raw:?} for key {key:?}"))),
        }
    }

    /// Flag value wins, then the file, then the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            out.push_str(key);
            out.push('\t');
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }
}

/// Render a threshold the way metric keys and report headers expect
/// (shortest float form: 0.8, 0.9, 0.85, ...).
pub fn threshold_key(t: f64) -> String {
    format!("{t}")
}
