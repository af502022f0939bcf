//! `key = value` tables used for chord aliases, shorthand degrees and
//! MusicXML kind mappings.
//!
//! One entry per line. Blank lines and lines whose first non-blank character
//! is `#` are ignored. The key is everything before the first ` = `, so keys
//! may contain symbols such as `-` or `Δ7`.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing entry for {0}")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Line { line: self.line, message: message.into() }
    }
}

pub fn parse_key_values(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(" = ")
            .ok_or_else(|| ConfigError::Line { line: idx + 1, message: format!("expected `key = value`, got {line:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Line { line: idx + 1, message: "empty key or value".into() });
        }
        out.push(Entry { line: idx + 1, key: key.to_string(), value: value.to_string() });
    }
    Ok(out)
}

/// Environment variable naming a directory with `aliases.conf`,
/// `shorthands.conf` and/or `kinds.conf` overrides.
pub const CONFIG_DIR_ENV: &str = "LEADSHEET_CONFIG_DIR";

pub fn config_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from)
}

/// Contents of `dir/name`, or `None` when the file does not exist.
pub fn read_optional(dir: &Path, name: &str) -> std::io::Result<Option<String>> {
    match std::fs::read_to_string(dir.join(name)) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_symbol_keys_and_skips_comments() {
        let entries = parse_key_values("# c\n\n- = min\nΔ7 = maj7\n7#9 = 7(#9)\n").unwrap();
        let keys: Vec<_> = entries.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["-", "Δ7", "7#9"]);
        assert_eq!(entries[2].line, 5);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        assert_eq!(
            parse_key_values("a = b\nnot an entry\n").unwrap_err(),
            ConfigError::Line { line: 2, message: "expected `key = value`, got \"not an entry\"".into() }
        );
    }
}
