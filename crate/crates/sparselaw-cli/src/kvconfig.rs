//! Plain-text `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Values are plain scalars or comma-separated lists. Unknown keys are
//! reported as warnings so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line} is not a `key = value` assignment: {text}")]
    BadLine { line: usize, text: String },
    #[error("config is missing required key `{0}`")]
    MissingKey(String),
    #[error("config key `{key}` has invalid value `{value}`: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
}

pub struct KvConfig {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: i + 1,
                text: raw.to_string(),
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self {
            values,
            used: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key).map(|s| s.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: v.into(),
                    expected: "a number",
                })
            })
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.u64_opt(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.u64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                // accept exponent notation for counts (e.g. 1e5)
                if let Ok(n) = v.parse::<u64>() {
                    return Ok(n);
                }
                match v.parse::<f64>() {
                    Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
                    _ => Err(ConfigError::BadValue {
                        key: key.into(),
                        value: v.into(),
                        expected: "a nonnegative integer",
                    }),
                }
            })
            .transpose()
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn str_opt(&self, key: &str) -> Option<String> {
        self.raw(key).map(|s| s.to_string())
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.raw(key) {
            None => Err(ConfigError::MissingKey(key.into())),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse::<f64>()
                        .map_err(|_| ConfigError::BadValue {
                            key: key.into(),
                            value: v.into(),
                            expected: "a comma-separated list of numbers",
                        })
                })
                .collect(),
        }
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        if self.values.contains_key(key) {
            self.f64_list(key)
        } else {
            Ok(default.to_vec())
        }
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>, ConfigError> {
        if !self.values.contains_key(key) {
            return Ok(default.to_vec());
        }
        let v = self.raw(key).unwrap().to_string();
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse::<u64>()
                    .map_err(|_| ConfigError::BadValue {
                        key: key.into(),
                        value: v.clone(),
                        expected: "a comma-separated list of integers",
                    })
            })
            .collect()
    }

    /// Warns on stderr about keys that no getter touched.
    pub fn warn_unused(&self) {
        let used = self.used.borrow();
        for key in self.values.keys() {
            if !used.contains(key) {
                eprintln!("warning: unrecognized config key `{key}`");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_comments() {
        let cfg = KvConfig::parse(
            "# comment\nprunable_params = 1e5\nsparsity = 0.8 # trailing\nlist = 1,2.5,3\nname = run a\n",
        )
        .unwrap();
        assert_eq!(cfg.u64("prunable_params").unwrap(), 100_000);
        assert_eq!(cfg.f64("sparsity").unwrap(), 0.8);
        assert_eq!(cfg.f64_list("list").unwrap(), vec![1.0, 2.5, 3.0]);
        assert_eq!(cfg.str_or("name", ""), "run a");
        assert_eq!(cfg.f64_or("absent", 7.0).unwrap(), 7.0);
    }

    #[test]
    fn rejects_bad_lines_and_values() {
        assert!(KvConfig::parse("just words\n").is_err());
        let cfg = KvConfig::parse("x = abc\n").unwrap();
        assert!(matches!(cfg.f64("x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(cfg.f64("y"), Err(ConfigError::MissingKey(_))));
    }
}
