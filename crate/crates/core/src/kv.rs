//! Flat plain-text `key=value` documents.
//!
//! One entry per line, `#` starts a comment line, blank lines are ignored.
//! Floats are written with 17 significant digits so that every `f64`
//! survives a write/read cycle bit for bit.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDocument {
    comments: Vec<String>,
    entries: Vec<(String, String)>,
}

/// Formats a float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // keeps -0.0 distinct
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.16e}")
}

impl KvDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                doc.comments.push(comment.trim().to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected key=value, got `{line}`"),
                ));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(idx + 1, "empty key"));
            }
            if doc.get(key).is_some() {
                return Err(Error::parse(idx + 1, format!("duplicate key `{key}`")));
            }
            doc.entries
                .push((key.to_string(), value.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn comment(&mut self, text: impl Into<String>) -> &mut Self {
        self.comments.push(text.into());
        self
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, format_f64(value))
    }

    pub fn push_u64(&mut self, key: &str, value: u64) -> &mut Self {
        self.push(key, value.to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("key `{key}`: `{v}` is not a number"))
                })
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?
            .ok_or_else(|| Error::Missing(format!("key `{key}`")))
    }

    pub fn require_u64(&self, key: &str) -> Result<u64> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::Missing(format!("key `{key}`")))?;
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("key `{key}`: `{v}` is not an integer")))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    /// Appends all entries of `other` (comments are dropped).
    pub fn extend(&mut self, other: &KvDocument) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }
}

impl fmt::Display for KvDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.comments {
            writeln!(f, "# {c}")?;
        }
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
