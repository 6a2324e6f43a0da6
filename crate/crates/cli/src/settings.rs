//! Config-file merging and shared run context.
//!
//! The config file is plain `key = value` lines keyed by long flag names.
//! Explicit flags always win; config supplies values for flags left unset.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::errors::{CliError, CliResult};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    line_no + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if given, else config-file value, else the default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
    default: T,
) -> CliResult<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))),
        None => Ok(default),
    }
}

/// Like [`resolve`] but the value may be absent entirely.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
) -> CliResult<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))),
        None => Ok(None),
    }
}

/// Global run context shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub config: ConfigFile,
}

impl Ctx {
    /// Path of an output artifact under the run's output directory.
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn ensure_out_dir(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::Write(self.out.clone(), e))
    }

    /// Runs `f` inside a rayon pool bounded by `--jobs`.
    pub fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> CliResult<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Comma-separated list parser for numeric flags like `--budgets 16,32,48`.
pub fn parse_list<T: FromStr>(raw: &str, what: &str) -> CliResult<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} entry `{s}`"))))
        .collect()
}
