//! Flat key/value configuration.
//!
//! Files hold one `key = value` pair per line; `#` starts a comment and runs
//! to the end of the line, blank lines are skipped, and a repeated key keeps
//! its last value. The `GEODEPTH_CONFIG` environment variable names a config
//! file to load by default; explicit `set` calls (command-line flags) win
//! over file values.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const CONFIG_ENV: &str = "GEODEPTH_CONFIG";

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    /// Loads the file named by `GEODEPTH_CONFIG`, or an empty config when
    /// the variable is unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CONFIG_ENV) {
            Ok(path) => Config::load(Path::new(&path)),
            Err(std::env::VarError::NotPresent) => Ok(Config::new()),
            Err(std::env::VarError::NotUnicode(_)) => Err(Error::InvalidParam(format!(
                "{CONFIG_ENV} is not valid UTF-8"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Config::new();
        config.merge_file(path)?;
        Ok(config)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        for (line, text) in crate::io::data_lines(path)? {
            let Some((key, value)) = text.split_once('=') else {
                return Err(Error::format(path, line, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::format(path, line, format!("bad key {key:?}")));
            }
            self.values.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        self.parse_with(key, default, str::parse::<f64>)
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        self.parse_with(key, default, str::parse::<usize>)
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        self.parse_with(key, default, str::parse::<u64>)
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        self.parse_with(key, default, str::parse::<bool>)
    }

    fn parse_with<T, E>(
        &self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> std::result::Result<T, E>,
    ) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => parse(raw)
                .map_err(|_| Error::InvalidParam(format!("config key {key}: bad value {raw:?}"))),
        }
    }

    /// Keys in sorted order, for diagnostics.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}
