//! Flat `key=value` configuration with per-command key tables.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use shortcut_lab::{Error, Result};

/// A recognised key, its default, and its help line.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Resolved parameters: defaults, overlaid by the config file, overlaid by flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub values: BTreeMap<String, String>,
}

/// Dashes and underscores are interchangeable in keys.
pub fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

/// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(Error::ParseError { line, msg: format!("expected key=value, got `{body}`") });
        };
        let k = normalize_key(k);
        if k.is_empty() {
            return Err(Error::ParseError { line, msg: "empty key".into() });
        }
        out.push((line, k, v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// Layers defaults, file entries and flag values. Unknown file keys are rejected.
    pub fn resolve(
        keys: &[Key],
        file: &[(usize, String, String)],
        flags: &[(String, String)],
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            keys.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        for (line, k, v) in file {
            if !values.contains_key(k) {
                let known: Vec<&str> = keys.iter().map(|k| k.name).collect();
                return Err(Error::ParseError { line: *line, msg: format!("unknown key `{k}` (known: {})", known.join(", ")) });
            }
            values.insert(k.clone(), v.clone());
        }
        for (k, v) in flags {
            values.insert(k.clone(), v.clone());
        }
        Ok(ExperimentConfig { values })
    }

    pub fn raw(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).unwrap_or_else(|| panic!("key `{k}` not declared"))
    }

    pub fn get<T: FromStr>(&self, k: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(k);
        s.parse().map_err(|e| Error::ConfigError(format!("{k} = `{s}`: {e}")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, k: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(k);
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|p| p.trim().parse().map_err(|e| Error::ConfigError(format!("{k} = `{s}`: {e}"))))
            .collect()
    }
}
