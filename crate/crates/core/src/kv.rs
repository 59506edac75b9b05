//! Flat `key = value` text files with dotted keys (`cf.mode = svdpp`).
//!
//! `#` starts a comment line. Keys are unique. List values are
//! comma-separated.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvFile {
    /// key → (value, line number)
    pub entries: BTreeMap<String, (String, usize)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!("expected `key = value`, found {line:?}"),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse { line: k + 1, message: "empty key".into() });
            }
            if entries.insert(key.clone(), (value.trim().to_string(), k + 1)).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(KvFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::config(key, format!("invalid value {v:?}: {e}"))))
            .transpose()
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                split_list(v)
                    .map(|item| {
                        item.parse::<T>()
                            .map_err(|e| Error::config(key, format!("invalid item {item:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Keys outside `known` (exact names, or prefixes ending in `.`).
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            let ok = known
                .iter()
                .any(|k| if k.ends_with('.') { key.starts_with(k) } else { key == k });
            if !ok {
                return Err(Error::config(key.clone(), "unknown key"));
            }
        }
        Ok(())
    }
}

pub fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Formats floats so that parsing gives back the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
