//! Flat `key=value` files used for schema maps, rule and parameter files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys and values are
//! trimmed; a value may be empty.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {0}: expected `key=value`")]
    Syntax(usize),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(KvError::Syntax(i + 1))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KvError::Syntax(i + 1));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(KvError::Duplicate(k.to_string()));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parse `key` if present.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| KvError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    /// Reject keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), KvError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(KvError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }
}

/// Render pairs as `key=value` lines in the given order.
pub fn render<K: Display, V: Display>(pairs: impl IntoIterator<Item = (K, V)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k}={v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_empty_values() {
        let m = KvMap::parse("# c\n a = 1 \n\nb=\n").unwrap();
        assert_eq!(m.get("a"), Some("1"));
        assert_eq!(m.get("b"), Some(""));
        assert_eq!(m.parse_opt::<f64>("a").unwrap(), Some(1.0));
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(KvMap::parse("novalue"), Err(KvError::Syntax(1)));
        assert!(matches!(KvMap::parse("a=1\na=2"), Err(KvError::Duplicate(_))));
        let m = KvMap::parse("x=abc").unwrap();
        assert!(m.parse_opt::<f64>("x").is_err());
        assert!(m.check_keys(&["y"]).is_err());
    }
}
