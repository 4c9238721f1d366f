//! `key = value` experiment files.
//!
//! One assignment per line; `#` starts a comment. Keys are the long flag
//! names without the leading dashes (`family`, `k`, `refine`, …).

use std::{collections::BTreeMap, fs, path::Path};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
}

/// Parsed assignments, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `text`, accepting only keys listed in `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            if values.insert(key.clone(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line, key });
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: impl AsRef<Path>, allowed: &[&str]) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|error| ConfigError::Io { path: path.display().to_string(), error })?;
        Self::parse(&text, allowed)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
