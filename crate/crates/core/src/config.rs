//! Flat `key = value` configuration text.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Keys
//! are lowercase identifiers. A later entry for the same key replaces an
//! earlier one, which is how `--set key=value` overrides are layered on top
//! of a file.

use crate::error::{Error, Result};

/// Ordered key/value entries as they appeared in the text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Entries {
    entries: Vec<(String, String)>,
}

impl Entries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_entry(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            out.set(k, v);
        }
        Ok(out)
    }

    /// Applies a single `key=value` override.
    pub fn apply_override(&mut self, text: &str) -> Result<()> {
        let (k, v) = split_entry(text.trim()).map_err(Error::Config)?;
        self.set(k, v);
        Ok(())
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_entry(line: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got `{line}`"))?;
    let k = k.trim();
    if k.is_empty()
        || !k
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        return Err(format!("bad key `{k}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

pub fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true/false, got `{v}`"
        ))),
    }
}

pub fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.replace('_', "")
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

/// Comma-separated reals, optionally wrapped in parentheses or brackets.
pub fn parse_vector(key: &str, v: &str) -> Result<Vec<f64>> {
    let inner = v
        .trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']']);
    inner
        .split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect()
}
