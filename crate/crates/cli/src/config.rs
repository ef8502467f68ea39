//! Flat `key = value` config files.
//!
//! One entry per line, `#` starts a comment, blank lines are skipped. Keys
//! are the long flag names, case-insensitive; `-` and `_` are
//! interchangeable. A flag given on the command line wins over the same key
//! in the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Config {
    origin: String,
    entries: BTreeMap<String, String>,
}

fn canonical(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Config::parse(&text, &path.display().to_string())
    }

    /// Config from an optional path; no path gives an empty config.
    pub fn from_arg(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Config::default()), Config::load)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`, got {raw:?}", i + 1))?;
            let key = canonical(key);
            if key.is_empty() {
                bail!("{origin}:{}: empty key", i + 1);
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("{origin}:{}: duplicate key {key:?}", i + 1);
            }
        }
        Ok(Config {
            origin: origin.to_string(),
            entries,
        })
    }

    /// Rejects keys the command does not know, so typos do not pass silently.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if !unknown.is_empty() {
            bail!(
                "{}: unknown keys {}; expected one of {}",
                self.origin,
                unknown.join(", "),
                allowed.join(", ")
            );
        }
        Ok(())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("{}: key {key}: cannot parse {v:?}: {e}", self.origin))
            })
            .transpose()
    }

    /// The flag if given, else the config value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.pick(flag, key)?.ok_or_else(|| {
            anyhow!(
                "missing required setting `{key}` (flag --{} or config key)",
                key.replace('_', "-")
            )
        })
    }

    /// Boolean switch: set by the flag or by a true config value.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}
