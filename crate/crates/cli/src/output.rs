use std::fmt::Display;
use std::path::Path;

use anyhow::{Context, Result};

/// Ordered `key=value` lines written as `summary.txt`.
#[derive(Default)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key}={value}"));
    }
}

pub fn write_summary(run_dir: &Path, s: &Summary) -> Result<()> {
    let path = run_dir.join("summary.txt");
    let mut text = s.lines.join("\n");
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
