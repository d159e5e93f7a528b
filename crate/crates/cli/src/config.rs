use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

/// Bad invocation: unknown key, unparsable value, unreadable config file.
/// Reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Fully resolved `key=value` settings of one run, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    entries: Vec<(&'static str, String)>,
}

impl RunConfig {
    /// Defaults, then the config file, then `--set` pairs, then named flags.
    pub fn resolve(
        defaults: Vec<(&'static str, String)>,
        file: Option<&Path>,
        sets: &[String],
        flags: Vec<(&'static str, Option<String>)>,
    ) -> Result<Self> {
        let mut cfg = RunConfig { entries: defaults };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = split_pair(line).map_err(|m| usage(format!("{}:{}: {m}", path.display(), i + 1)))?;
                cfg.set(k, v).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
            }
        }
        for pair in sets {
            let (k, v) = split_pair(pair).map_err(|m| usage(format!("--set {pair}: {m}")))?;
            cfg.set(k, v)?;
        }
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        cfg.get::<u64>("seed")?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let known: Vec<&str> = self.entries.iter().map(|(k, _)| *k).collect();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => {
                entry.1 = value.to_string();
                Ok(())
            }
            None => Err(usage(format!("unknown key {key:?} (known: {})", known.join(", ")))),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("key {key} not declared"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| usage(format!("{key}={raw}: {e}")))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|e| usage(format!("{key}={raw}: {e}"))))
            .collect()
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.raw(key))
    }

    pub fn seed(&self) -> u64 {
        self.get("seed").expect("seed validated on resolve")
    }

    /// Same `key=value` text the config file accepts.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn announce(&self, command: &str) {
        println!("{command}: resolved config");
        for (k, v) in &self.entries {
            println!("  {k}={v}");
        }
        println!("seed={}", self.seed());
    }
}

fn split_pair(s: &str) -> std::result::Result<(&str, &str), &'static str> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    let k = k.trim();
    if k.is_empty() {
        return Err("empty key");
    }
    Ok((k, v.trim()))
}

/// Fresh `<out_dir>/<command>-<unix seconds>-seed<seed>` directory holding
/// the resolved config.
pub fn create_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let root = cfg.path("out_dir");
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let base = format!("{command}-{secs}-seed{}", cfg.seed());
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let mut dir = root.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = root.join(format!("{base}-{n}"));
        n += 1;
    }
    std::fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.txt"), cfg.render()).with_context(|| format!("writing {}", dir.display()))?;
    println!("run_dir={}", dir.display());
    Ok(dir)
}
