//! `key = value` run configuration. Every key read is recorded with its
//! effective value so the manifest describes the run completely.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct Config {
    given: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
    ignored: RefCell<BTreeSet<String>>,
}

impl Config {
    /// Lines are `key = value`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got `{raw}`", n + 1);
            };
            cfg.set(k.trim(), v.trim()).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() || key.contains(char::is_whitespace) {
            bail!("invalid key `{key}`");
        }
        self.given.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').with_context(|| format!("expected KEY=VALUE, got `{pair}`"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.given.get(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| anyhow::anyhow!("config `{key}` = `{raw}`: {e}"))?,
            None => default,
        };
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Comma-separated list.
    pub fn get_list<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let values = match self.given.get(key) {
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("config `{key}` item `{s}`: {e}")))
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        let shown: Vec<String> = values.iter().map(ToString::to_string).collect();
        self.resolved.borrow_mut().insert(key.to_string(), shown.join(","));
        Ok(values)
    }

    /// Marks `keys` as known without recording them. Returns the ones that
    /// were set.
    pub fn ignore(&self, keys: &[&str]) -> Vec<String> {
        let set: Vec<String> = keys.iter().filter(|k| self.given.contains_key(**k)).map(|k| k.to_string()).collect();
        self.ignored.borrow_mut().extend(set.iter().cloned());
        set
    }

    /// Fails on keys that no part of the command read.
    pub fn check_unused(&self) -> Result<()> {
        let resolved = self.resolved.borrow();
        let ignored = self.ignored.borrow();
        let unused: BTreeSet<&String> =
            self.given.keys().filter(|k| !resolved.contains_key(*k) && !ignored.contains(*k)).collect();
        if !unused.is_empty() {
            let names: Vec<&str> = unused.into_iter().map(String::as_str).collect();
            bail!("unknown config keys for this command: {}", names.join(", "));
        }
        Ok(())
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let c = Config::parse("# run\nepochs = 5  # short\n\nlr=0.5\n").unwrap();
        assert_eq!(c.get("epochs", 1usize).unwrap(), 5);
        assert_eq!(c.get("lr", 0.1f64).unwrap(), 0.5);
        assert_eq!(c.get("dim", 64usize).unwrap(), 64);
        assert_eq!(c.resolved().get("dim").map(String::as_str), Some("64"));
        c.check_unused().unwrap();
    }

    #[test]
    fn rejects_bad_lines_values_and_unused_keys() {
        assert!(Config::parse("epochs 5").is_err());
        let c = Config::parse("epochs = many").unwrap();
        assert!(c.get("epochs", 1usize).is_err());
        let c = Config::parse("typo = 1").unwrap();
        assert!(c.check_unused().is_err());
        assert_eq!(c.ignore(&["typo", "other"]), vec!["typo".to_string()]);
        c.check_unused().unwrap();
        assert!(c.resolved().is_empty());
    }

    #[test]
    fn lists_and_overrides() {
        let mut c = Config::parse("steps = 1, 2,3").unwrap();
        c.set_pair("seed=4").unwrap();
        assert_eq!(c.get_list("steps", &[5usize]).unwrap(), vec![1, 2, 3]);
        assert_eq!(c.get("seed", 0u64).unwrap(), 4);
        assert!(c.set_pair("novalue").is_err());
    }
}
