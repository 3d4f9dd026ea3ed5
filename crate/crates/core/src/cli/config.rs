//! Flat `key = value` configuration files.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Usage(format!(
                "config line {}: expected key = value, got '{line}'",
                k + 1
            )));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Usage(format!("config line {}: empty key", k + 1)));
        }
        if out.iter().any(|e: &Entry| e.key == key) {
            return Err(Error::Usage(format!(
                "config line {}: duplicate key '{key}'",
                k + 1
            )));
        }
        out.push(Entry {
            key,
            value: value.trim().trim_matches('"').to_string(),
            line: k + 1,
        });
    }
    Ok(out)
}

pub fn read_entries(path: &Path) -> Result<Vec<Entry>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_entries(&text)
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| {
            Error::Usage(format!(
                "config line {}: invalid value '{}' for '{}'",
                self.line, self.value, self.key
            ))
        })
    }

    pub fn parse_bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(Error::Usage(format!(
                "config line {}: '{}' is not a boolean",
                self.line, self.value
            ))),
        }
    }

    pub fn parse_list(&self) -> Result<Vec<f64>> {
        parse_float_list(&self.value).map_err(|_| {
            Error::Usage(format!(
                "config line {}: '{}' is not a comma-separated list of numbers",
                self.line, self.value
            ))
        })
    }

    pub fn unknown(&self) -> Error {
        Error::Usage(format!(
            "config line {}: unknown key '{}'",
            self.line, self.key
        ))
    }
}

pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            c.parse::<f64>()
                .map_err(|_| Error::Usage(format!("'{c}' is not a number")))
        })
        .collect()
}
