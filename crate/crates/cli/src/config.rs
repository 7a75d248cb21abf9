//! Flat `key = value` run configuration.
//!
//! Lines hold one `key = value` pair; `#` or `;` start comment lines and
//! blank lines are skipped. Keys are case-insensitive and a repeated key
//! keeps its last value. One file may carry keys for several subcommands;
//! each subcommand reads only the keys it knows, so unrelated keys are not
//! an error. Method panels use dotted keys: `method.1.kind = kernel`,
//! `method.1.k = 4`, and so on.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct Config {
    entries: HashMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Config::default()
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!("{origin}:{}: expected `key = value`, got {line:?}", lineno + 1)
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(format!("{origin}:{}: empty key", lineno + 1));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parse one value; a malformed entry is reported against its key.
    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key} = {raw:?}: {e}")),
        }
    }

    /// Distinct indices appearing as `method.<i>.<field>`, ascending.
    pub fn method_indices(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix("method."))
            .filter_map(|rest| rest.split_once('.'))
            .filter_map(|(i, _)| i.parse().ok())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
