//! Flat key-value configuration with section-prefixed keys
//! ("hmm.mixtures = 8"). Command-line flags override file values; the
//! effective config dumps deterministically next to every artifact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        ConfigMap::default()
    }

    pub fn parse_str(text: &str) -> Result<ConfigMap> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<config>".into(),
                line: lineno + 1,
                detail: format!("expected 'key = value', got '{line}'"),
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigMap { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<ConfigMap> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigMap::parse_str(&text).map_err(|e| match e {
            Error::Parse { line, detail, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                detail,
            },
            other => other,
        })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Overlay `other` on top of this config (other wins).
    pub fn overlay(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::InvalidParam(format!("config key '{key}': bad number '{s}'"))
            }),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::InvalidParam(format!("config key '{key}': bad integer '{s}'"))
            }),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::InvalidParam(format!("config key '{key}': bad integer '{s}'"))
            }),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(s) => Err(Error::InvalidParam(format!(
                "config key '{key}': bad boolean '{s}'"
            ))),
        }
    }

    pub fn get_string(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    /// Canonical dump: sorted "key = value" lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(self.dump().as_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overlay_dump() {
        let base = ConfigMap::parse_str(
            "corpus.n_utterances = 60\nhmm.mixtures = 8  # final component count\n\n# comment\nlm.scale = 1.0\n",
        )
        .unwrap();
        assert_eq!(base.get("hmm.mixtures"), Some("8"));
        let mut merged = base.clone();
        let mut over = ConfigMap::new();
        over.set("lm.scale", "2.5");
        merged.overlay(&over);
        assert_eq!(merged.get_f64("lm.scale", 1.0).unwrap(), 2.5);
        // Deterministic sorted dump.
        let dump = merged.dump();
        let again = ConfigMap::parse_str(&dump).unwrap();
        assert_eq!(again, merged);
        assert!(dump.find("corpus.").unwrap() < dump.find("hmm.").unwrap());
    }

    #[test]
    fn typed_getters_validate() {
        let c = ConfigMap::parse_str("a = nope\n").unwrap();
        assert!(c.get_f64("a", 0.0).is_err());
        assert_eq!(c.get_f64("missing", 7.5).unwrap(), 7.5);
        assert!(c.get_bool("a", true).is_err());
    }

    #[test]
    fn bad_line_rejected() {
        assert!(ConfigMap::parse_str("missing equals sign\n").is_err());
    }
}
