//! `key = value` configuration files.
//!
//! Keys are the long flag names, with `_` accepted in place of `-`. Blank
//! lines and lines starting with `#` are ignored. Relative paths are taken
//! relative to the directory holding the file. A flag given on the command
//! line always wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct Settings {
    source: Option<PathBuf>,
    entries: BTreeMap<String, (String, usize)>,
}

impl Settings {
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let settings = Self::parse(&text, path)?;
        for (key, (_, line)) in &settings.entries {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "{}:{line}: unknown key '{key}' (accepted: {})",
                    path.display(),
                    allowed.join(", ")
                );
            }
        }
        Ok(settings)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected 'key = value', found '{line}'", path.display(), i + 1);
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim().trim_matches('"').to_string();
            if entries.insert(key.clone(), (value, i + 1)).is_some() {
                bail!("{}:{}: key '{key}' given twice", path.display(), i + 1);
            }
        }
        Ok(Self {
            source: Some(path.to_path_buf()),
            entries,
        })
    }

    fn location(&self, line: usize) -> String {
        let file = self.source.as_deref().map(Path::display);
        format!("{}:{line}", file.map(|f| f.to_string()).unwrap_or_default())
    }

    /// The flag value if present, otherwise the parsed file value.
    pub fn value<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("{}: invalid value '{raw}' for '{key}': {e}", self.location(*line))),
        }
    }

    pub fn value_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.value(flag, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.value(flag, key)? {
            Some(v) => Ok(v),
            None => bail!("missing required option --{key} (flag or config key '{key}')"),
        }
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        if flag.is_some() {
            return flag;
        }
        let (raw, _) = self.entries.get(key)?;
        let p = PathBuf::from(raw);
        match self.source.as_deref().and_then(Path::parent) {
            Some(dir) if p.is_relative() => Some(dir.join(p)),
            _ => Some(p),
        }
    }

    pub fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        match self.path(flag, key) {
            Some(p) => Ok(p),
            None => bail!("missing required option --{key} (flag or config key '{key}')"),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.value_or(None, key, false)
    }
}
