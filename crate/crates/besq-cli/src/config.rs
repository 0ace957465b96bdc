//! key=value config files merged under explicit command-line flags.
//!
//! A config file holds one `key=value` pair per line (`#` comments and
//! blank lines allowed). Keys use the long flag names of the subcommand.
//! Unknown keys are rejected up front; explicit flags override file
//! values; defaults fill whatever remains.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown key {key:?} (allowed: {})",
                    path.display(),
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::usage(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(FileConfig { values })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::usage(format!("config key {key}: cannot parse {raw:?}: {e}"))
            }),
        }
    }
}

/// Resolve one parameter: explicit flag beats config file beats default.
pub fn resolve<T: std::str::FromStr + Clone>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: Option<T>,
) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = file.get::<T>(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| CliError::usage(format!("missing required parameter: {key}")))
}

/// As [`resolve`] but the parameter may stay unset.
pub fn resolve_opt<T: std::str::FromStr + Clone>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(Some(v));
    }
    file.get::<T>(key)
}

/// Comma-separated float list used by schedule flags.
pub fn parse_f64_list(raw: &str, key: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("{key}: bad entry {s:?}: {e}")))
        })
        .collect()
}
