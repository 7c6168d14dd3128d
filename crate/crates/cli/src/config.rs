//! Run configuration: a flat TOML-style file with `[section]` headers and
//! `key = value` lines. Values are booleans, integers, floats, quoted
//! strings, or numeric arrays. Every key can be overridden through the
//! environment as `DDCSENSE_<SECTION>_<KEY>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ddc_sense::zurcher::ZurcherConfig;
use ddc_sense::{Error, Result};

pub const ENV_PREFIX: &str = "DDCSENSE_";

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<f64>),
}

impl Value {
    fn parse(raw: &str) -> Option<Value> {
        let raw = raw.trim();
        if raw == "true" {
            return Some(Value::Bool(true));
        }
        if raw == "false" {
            return Some(Value::Bool(false));
        }
        if raw.starts_with('"') && raw.ends_with('"') && raw.len() >= 2 {
            return Some(Value::Str(raw[1..raw.len() - 1].to_string()));
        }
        if raw.starts_with('[') && raw.ends_with(']') {
            let inner = &raw[1..raw.len() - 1];
            let mut list = Vec::new();
            for part in inner.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                list.push(part.parse::<f64>().ok()?);
            }
            return Some(Value::List(list));
        }
        if let Ok(i) = raw.parse::<i64>() {
            return Some(Value::Int(i));
        }
        if let Ok(f) = raw.parse::<f64>() {
            return Some(Value::Float(f));
        }
        None
    }

    fn render(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format!("{f}"),
            Value::Str(s) => format!("{s:?}"),
            Value::List(l) => {
                let parts: Vec<String> = l.iter().map(|v| format!("{v}")).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
}

/// Parsed configuration. Keys are `(section, key)` pairs; the map is
/// ordered so the hash of the effective configuration is stable.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<(String, String), Value>,
    /// Directory of the config file, for resolving relative paths.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut cfg = Self::from_str_named(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.apply_env_overrides(std::env::vars());
        Ok(cfg)
    }

    pub fn from_str_named(text: &str, name: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                if section.is_empty() {
                    return Err(Error::parse(name, format!("line {}: empty section", lineno + 1)));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    name,
                    format!("line {}: expected `key = value`", lineno + 1),
                ));
            };
            if section.is_empty() {
                return Err(Error::parse(
                    name,
                    format!("line {}: key outside any [section]", lineno + 1),
                ));
            }
            let parsed = Value::parse(value).ok_or_else(|| {
                Error::parse(
                    name,
                    format!("line {}: cannot parse value {:?}", lineno + 1, value.trim()),
                )
            })?;
            values.insert((section.clone(), key.trim().to_string()), parsed);
        }
        Ok(Self {
            values,
            base_dir: PathBuf::from("."),
        })
    }

    /// Applies `DDCSENSE_<SECTION>_<KEY>` overrides. Section names take
    /// the first `_`-delimited token, so keys themselves may contain
    /// underscores.
    pub fn apply_env_overrides(&mut self, vars: impl Iterator<Item = (String, String)>) {
        for (name, raw) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, key)) = rest.split_once('_') else {
                continue;
            };
            if let Some(value) = Value::parse(&raw) {
                self.values.insert(
                    (section.to_lowercase(), key.to_lowercase()),
                    value,
                );
            }
        }
    }

    /// FNV-1a hash of the canonicalized effective configuration.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for ((section, key), value) in &self.values {
            feed(section.as_bytes());
            feed(b".");
            feed(key.as_bytes());
            feed(b"=");
            feed(value.render().as_bytes());
            feed(b"\n");
        }
        format!("{h:016x}")
    }

    pub fn resolve_path(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.values.get(&(section.to_string(), key.to_string()))
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Int(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(bad_type(section, key, "number", other)),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn f64_required(&self, section: &str, key: &str) -> Result<f64> {
        self.f64_opt(section, key)?
            .ok_or_else(|| missing(section, key))
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Int(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(bad_type(section, key, "nonnegative integer", other)),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(section, key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Int(i)) if *i >= 0 => Ok(*i as u64),
            Some(other) => Err(bad_type(section, key, "nonnegative integer", other)),
        }
    }

    pub fn str_opt(&self, section: &str, key: &str) -> Result<Option<String>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Str(s)) => Ok(Some(s.clone())),
            Some(other) => Err(bad_type(section, key, "string", other)),
        }
    }

    pub fn str_or(&self, section: &str, key: &str, default: &str) -> Result<String> {
        Ok(self.str_opt(section, key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(other) => Err(bad_type(section, key, "boolean", other)),
        }
    }

    pub fn list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::List(l)) => Ok(Some(l.clone())),
            Some(Value::Float(f)) => Ok(Some(vec![*f])),
            Some(Value::Int(i)) => Ok(Some(vec![*i as f64])),
            Some(other) => Err(bad_type(section, key, "numeric list", other)),
        }
    }

    /// The `[model]` section as a bus-engine config (keys `num_states,
    /// phi1, phi2, mc, rc, beta`).
    pub fn model(&self) -> Result<ZurcherConfig> {
        let cfg = ZurcherConfig {
            num_states: self
                .usize_opt("model", "num_states")?
                .ok_or_else(|| missing("model", "num_states"))?,
            phi1: self.f64_required("model", "phi1")?,
            phi2: self.f64_required("model", "phi2")?,
            mc: self.f64_required("model", "mc")?,
            rc: self.f64_required("model", "rc")?,
            beta: self.f64_required("model", "beta")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn strip_comment(line: &str) -> &str {
    // Respect quoted strings when stripping trailing comments.
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn missing(section: &str, key: &str) -> Error {
    Error::Domain(format!("config is missing required key [{section}] {key}"))
}

fn bad_type(section: &str, key: &str, expected: &str, got: &Value) -> Error {
    Error::Domain(format!(
        "config key [{section}] {key}: expected {expected}, found {got:?}"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# comment
[model]
num_states = 20
phi1 = 0.35
phi2 = 0.1
mc = 0.05
rc = 8.0
beta = 0.95

[data]
source = "simulate"
units = 100
periods = 200
seed = 42

[sensitivity]
betas = [0.85, 0.9, 0.95]
"#;

    #[test]
    fn parses_sections_and_types() {
        let cfg = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        let model = cfg.model().unwrap();
        assert_eq!(model.num_states, 20);
        assert_eq!(cfg.str_or("data", "source", "?").unwrap(), "simulate");
        assert_eq!(cfg.u64_or("data", "seed", 0).unwrap(), 42);
        assert_eq!(
            cfg.list_opt("sensitivity", "betas").unwrap().unwrap(),
            vec![0.85, 0.9, 0.95]
        );
    }

    #[test]
    fn env_overrides_replace_values() {
        let mut cfg = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        cfg.apply_env_overrides(
            vec![
                ("DDCSENSE_MODEL_BETA".to_string(), "0.9".to_string()),
                ("DDCSENSE_DATA_SEED".to_string(), "7".to_string()),
                ("UNRELATED".to_string(), "1".to_string()),
            ]
            .into_iter(),
        );
        assert_eq!(cfg.model().unwrap().beta, 0.9);
        assert_eq!(cfg.u64_or("data", "seed", 0).unwrap(), 7);
    }

    #[test]
    fn env_override_keys_may_contain_underscores() {
        let mut cfg = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        cfg.apply_env_overrides(
            vec![("DDCSENSE_MODEL_NUM_STATES".to_string(), "12".to_string())].into_iter(),
        );
        assert_eq!(cfg.model().unwrap().num_states, 12);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        let b = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::from_str_named(SAMPLE, "<test>").unwrap();
        c.apply_env_overrides(
            vec![("DDCSENSE_MODEL_BETA".to_string(), "0.9".to_string())].into_iter(),
        );
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_keys_outside_sections() {
        assert!(RunConfig::from_str_named("a = 1\n", "<test>").is_err());
    }

    #[test]
    fn comments_inside_quotes_survive() {
        let cfg = RunConfig::from_str_named("[s]\npath = \"a#b.csv\"\n", "<test>").unwrap();
        assert_eq!(cfg.str_or("s", "path", "").unwrap(), "a#b.csv");
    }
}
