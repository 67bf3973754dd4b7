//! Flat key=value configuration files.
//!
//! The format is a simplified TOML: one `key = value` pair per line,
//! optional `[section]` headers that prefix the following keys with
//! `section.`, `#` comments and blank lines. Values may be wrapped in
//! one pair of double quotes to preserve surrounding whitespace. Keys
//! are restricted to `[A-Za-z0-9_.-]` and duplicates are rejected, so a
//! typo'd override fails loudly instead of silently losing.
//!
//! Command-line tools layer their flags on top: a flag given explicitly
//! wins over the file, which wins over the built-in default.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed configuration: full dotted key → raw string value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

/// Parses configuration text. `path` only labels errors.
pub fn parse_config_str(text: &str, path: &str) -> Result<ConfigMap> {
    let mut entries = BTreeMap::new();
    let mut prefix = String::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(Error::parse(path, lineno, "unterminated [section] header"));
            };
            let name = name.trim();
            if !valid_key(name) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("bad section name {name:?}"),
                ));
            }
            prefix = format!("{name}.");
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected key = value, got {line:?}"),
            ));
        };
        let key = key.trim();
        if !valid_key(key) {
            return Err(Error::parse(path, lineno, format!("bad key {key:?}")));
        }
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        let full = format!("{prefix}{key}");
        if entries.contains_key(&full) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate key {full:?}"),
            ));
        }
        entries.insert(full, value.to_string());
    }
    Ok(ConfigMap { entries })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, &path.to_string_lossy())
}

impl ConfigMap {
    /// Raw string value of a key, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn typed<T, F>(&self, key: &str, what: &str, parse: F) -> Result<Option<T>>
    where
        F: FnOnce(&str) -> Option<T>,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw).map(Some).ok_or_else(|| {
                Error::Invalid(format!("config key {key}: expected {what}, got {raw:?}"))
            }),
        }
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, "a finite number", |s| {
            s.parse::<f64>().ok().filter(|v| v.is_finite())
        })
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "a non-negative integer", |s| s.parse().ok())
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, "a non-negative integer", |s| s.parse().ok())
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.typed(key, "true or false", |s| match s {
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            _ => None,
        })
    }

    /// Comma-separated list of finite numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.typed(key, "comma-separated numbers", |s| {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        })
    }

    /// Comma-separated list of non-negative integers.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.typed(key, "comma-separated integers", |s| {
            s.split(',').map(|p| p.trim().parse().ok()).collect()
        })
    }

    /// Comma-separated list of strings (trimmed, empties rejected).
    pub fn get_str_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        self.typed(key, "a comma-separated list", |s| {
            s.split(',')
                .map(|p| {
                    let p = p.trim();
                    (!p.is_empty()).then(|| p.to_string())
                })
                .collect()
        })
    }

    /// Keys present in the file but not in the recognized set — usually
    /// typos worth warning about.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_quotes_parse() {
        let text = "\n# a comment\nseed = 7\nsynth.noise-mm = 0.8\n\n[train]\nepochs = 30\nname = \" two words \"\n";
        let cfg = parse_config_str(text, "t").unwrap();
        assert_eq!(cfg.len(), 4);
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get("synth.noise-mm"), Some("0.8"));
        assert_eq!(cfg.get("train.epochs"), Some("30"));
        assert_eq!(cfg.get("train.name"), Some(" two words "));
        assert_eq!(cfg.get("epochs"), None);
    }

    #[test]
    fn typed_accessors_parse_and_name_bad_keys() {
        let cfg = parse_config_str(
            "x = 1.5\nn = 12\nyes = true\nno = 0\nlist = 1, 2.5 ,3\nids = 5,6\nwords = a, b\nbad = abc\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.get_f64("x").unwrap(), Some(1.5));
        assert_eq!(cfg.get_usize("n").unwrap(), Some(12));
        assert_eq!(cfg.get_u64("n").unwrap(), Some(12));
        assert_eq!(cfg.get_bool("yes").unwrap(), Some(true));
        assert_eq!(cfg.get_bool("no").unwrap(), Some(false));
        assert_eq!(cfg.get_f64_list("list").unwrap(), Some(vec![1.0, 2.5, 3.0]));
        assert_eq!(cfg.get_usize_list("ids").unwrap(), Some(vec![5, 6]));
        assert_eq!(
            cfg.get_str_list("words").unwrap(),
            Some(vec!["a".to_string(), "b".to_string()])
        );
        assert_eq!(cfg.get_f64("absent").unwrap(), None);

        let err = cfg.get_f64("bad").unwrap_err().to_string();
        assert!(err.contains("bad") && err.contains("abc"), "{err}");
        assert!(cfg.get_usize("x").is_err());
        assert!(cfg.get_bool("bad").is_err());
        assert!(cfg.get_f64_list("bad").is_err());
    }

    #[test]
    fn malformed_lines_are_rejected_with_line_numbers() {
        for (text, needle) in [
            ("a = 1\nb\n", "key = value"),
            ("[sec\nx = 1\n", "unterminated"),
            ("[]\n", "bad section"),
            ("[two words]\n", "bad section"),
            (" = 3\n", "bad key"),
            ("sp ace = 3\n", "bad key"),
            ("a = 1\na = 2\n", "duplicate"),
            ("[s]\nk = 1\n[s]\nk = 2\n", "duplicate"),
        ] {
            let err = parse_config_str(text, "t").unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
        let err = parse_config_str("ok = 1\nbroken\n", "cfg.ini").unwrap_err();
        assert!(matches!(&err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        let cfg = parse_config_str("x = nan\ny = inf\n", "t").unwrap();
        assert!(cfg.get_f64("x").is_err());
        assert!(cfg.get_f64_list("y").is_err());
    }

    #[test]
    fn unknown_keys_are_reported_sorted() {
        let cfg = parse_config_str("b = 1\na = 2\nseed = 3\n", "t").unwrap();
        assert_eq!(cfg.unknown_keys(&["seed"]), vec!["a", "b"]);
        assert!(cfg.unknown_keys(&["a", "b", "seed"]).is_empty());
        assert!(!cfg.is_empty());
    }
}
