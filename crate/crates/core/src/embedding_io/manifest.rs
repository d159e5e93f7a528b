use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::binio::write_file;
use crate::error::{Error, ParseError, Result};

const KEYS: [&str; 5] = ["block_count", "classes", "split", "producer", "embedding_model"];

/// `key=value` sidecar describing a block file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub block_count: usize,
    /// Class names indexed by label; empty for unlabeled sets.
    pub classes: Vec<String>,
    pub split: String,
    pub producer: String,
    pub embedding_model: String,
}

/// `data/train.peb` → `data/train.manifest`.
pub fn manifest_path_for(blocks_path: &Path) -> PathBuf {
    blocks_path.with_extension("manifest")
}

impl DatasetManifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |msg: String| Error::parse(path, ParseError::Other(msg));
        let mut m = DatasetManifest::default();
        let mut seen = [false; KEYS.len()];
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("line {}: expected key=value", n + 1)))?;
            let idx = KEYS
                .iter()
                .position(|k| *k == key.trim())
                .ok_or_else(|| fail(format!("line {}: unknown key {:?}", n + 1, key.trim())))?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(fail(format!("line {}: duplicate key {:?}", n + 1, KEYS[idx])));
            }
            let value = value.trim();
            match idx {
                0 => {
                    m.block_count = value
                        .parse()
                        .map_err(|_| fail(format!("line {}: block_count {value:?} is not a count", n + 1)))?
                }
                1 => {
                    m.classes = value
                        .split(',')
                        .map(str::trim)
                        .filter(|c| !c.is_empty())
                        .map(String::from)
                        .collect()
                }
                2 => m.split = value.to_string(),
                3 => m.producer = value.to_string(),
                _ => m.embedding_model = value.to_string(),
            }
        }
        if !seen[0] {
            return Err(fail("missing block_count".into()));
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "block_count={}", self.block_count);
        let _ = writeln!(s, "classes={}", self.classes.join(","));
        let _ = writeln!(s, "split={}", self.split);
        let _ = writeln!(s, "producer={}", self.producer);
        let _ = writeln!(s, "embedding_model={}", self.embedding_model);
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_text().as_bytes())
    }
}
