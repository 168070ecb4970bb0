//! Flat `key = value` text format shared by the atomic-constants file and
//! run configurations.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! may contain dots to group related settings. Duplicate keys are rejected.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based line number in the source text.
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, message: format!("expected `key = value`, got `{content}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse { line, message: "empty key".into() });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Parse { line, message: format!("duplicate key `{key}` (first set on line {})", prev.line) });
        }
        entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(entries)
}

impl Entry {
    pub fn parse_f64(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.type_error("a finite number"))
    }

    pub fn parse_u64(&self) -> Result<u64> {
        self.value.parse::<u64>().map_err(|_| self.type_error("a non-negative integer"))
    }

    pub fn parse_bool(&self) -> Result<bool> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Ok(true),
            "false" | "off" | "no" | "0" => Ok(false),
            _ => Err(self.type_error("a boolean (on/off)")),
        }
    }

    pub fn type_error(&self, expected: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("`{}` must be {expected}, got `{}`", self.key, self.value),
        }
    }
}
