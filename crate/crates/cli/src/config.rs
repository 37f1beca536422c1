//! Flat `key = value` config files.
//!
//! One entry per line. Blank lines and lines whose first non-blank
//! character is `#` are ignored. Keys are flag names without the leading
//! `--` (`mother-mass` and `mother_mass` are the same key); the value is the
//! rest of the line after the first `=`, trimmed. A key may appear once.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub detail: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.detail)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed entries in file order, keys normalized to kebab-case.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |detail: String| ConfigError { line: i + 1, detail };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(err(format!("invalid key `{key}`")));
        }
        let key = key.replace('_', "-");
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}
