//! Report-style validation: collects every violation instead of stopping at
//! the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use super::{manifest_path_for, DatasetManifest, BLOCK_MAGIC, BLOCK_TOKENS, EMBED_DIM, HEADER_BYTES, VOCAB_SIZE};
use crate::binio::read_file;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadMagic { found: Vec<u8> },
    Header { field: &'static str, value: u64, expected: u64 },
    Truncated { expected: u64, actual: u64 },
    TrailingBytes { extra: u64 },
    TokenOutOfRange { block: usize, position: usize, id: u32 },
    NonFinite { block: usize, token: usize, dim: usize },
    LabelOutOfRange { block: usize, label: u32, classes: usize },
    Manifest(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadMagic { found } => write!(f, "bad magic {found:02x?}"),
            Violation::Header { field, value, expected } => {
                write!(f, "header {field} = {value}, expected {expected}")
            }
            Violation::Truncated { expected, actual } => {
                write!(f, "truncated: need {expected} bytes, file has {actual}")
            }
            Violation::TrailingBytes { extra } => write!(f, "{extra} trailing bytes"),
            Violation::TokenOutOfRange { block, position, id } => {
                write!(f, "block {block} position {position}: token id {id} >= {VOCAB_SIZE}")
            }
            Violation::NonFinite { block, token, dim } => {
                write!(f, "block {block} token {token} dim {dim}: non-finite embedding")
            }
            Violation::LabelOutOfRange { block, label, classes } => {
                write!(f, "block {block}: label {label} but manifest lists {classes} classes")
            }
            Violation::Manifest(msg) => write!(f, "manifest: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureReport {
    pub path: PathBuf,
    pub declared_blocks: usize,
    pub blocks_read: usize,
    pub labeled: bool,
    pub label_histogram: BTreeMap<u32, usize>,
    /// Mean per-token L2 norm of each block's embeddings.
    pub block_norms: Vec<f64>,
    pub manifest: Option<DatasetManifest>,
    pub violations: Vec<Violation>,
}

impl FixtureReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            writeln!(f, "ok: {} blocks", self.blocks_read)?;
        } else {
            writeln!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
        }
        writeln!(f, "T={BLOCK_TOKENS} D={EMBED_DIM} V={VOCAB_SIZE} labeled={}", self.labeled)?;
        if !self.label_histogram.is_empty() {
            let parts: Vec<String> = self.label_histogram.iter().map(|(l, n)| format!("{l}:{n}")).collect();
            writeln!(f, "labels {}", parts.join(" "))?;
        }
        if !self.block_norms.is_empty() {
            let min = self.block_norms.iter().copied().fold(f64::INFINITY, f64::min);
            let max = self.block_norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            writeln!(f, "mean token norm per block: min {min:.4} max {max:.4}")?;
        }
        Ok(())
    }
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Scans `path` (and its manifest, if present) for every invariant violation.
/// Only I/O failures are errors.
pub fn validate_fixture(path: &Path) -> Result<FixtureReport> {
    let bytes = read_file(path)?;
    let mut report = FixtureReport {
        path: path.to_path_buf(),
        declared_blocks: 0,
        blocks_read: 0,
        labeled: false,
        label_histogram: BTreeMap::new(),
        block_norms: Vec::new(),
        manifest: None,
        violations: Vec::new(),
    };
    scan(&bytes, &mut report);

    let mpath = manifest_path_for(path);
    if mpath.exists() {
        match DatasetManifest::load(&mpath) {
            Ok(m) => {
                if m.block_count != report.declared_blocks {
                    report.violations.push(Violation::Manifest(format!(
                        "block_count {} but file declares {}",
                        m.block_count, report.declared_blocks
                    )));
                }
                let n = m.classes.len();
                if n > 0 && report.label_histogram.keys().any(|&l| l as usize >= n) {
                    rescan_labels(&bytes, n, &mut report);
                }
                report.manifest = Some(m);
            }
            Err(e) => report.violations.push(Violation::Manifest(e.to_string())),
        }
    }
    Ok(report)
}

fn scan(b: &[u8], report: &mut FixtureReport) {
    let v = &mut report.violations;
    if b.len() < 4 || &b[..4] != BLOCK_MAGIC {
        v.push(Violation::BadMagic {
            found: b[..b.len().min(4)].to_vec(),
        });
        return;
    }
    if b.len() < HEADER_BYTES {
        v.push(Violation::Truncated {
            expected: HEADER_BYTES as u64,
            actual: b.len() as u64,
        });
        return;
    }
    report.declared_blocks = u32_at(b, 4) as usize;
    let mut dims_ok = true;
    for (field, off, expected) in [("T", 8, BLOCK_TOKENS), ("D", 12, EMBED_DIM), ("V", 16, VOCAB_SIZE)] {
        let value = u32_at(b, off);
        if value as usize != expected {
            v.push(Violation::Header {
                field,
                value: value as u64,
                expected: expected as u64,
            });
            dims_ok = false;
        }
    }
    let flag = b[20];
    if flag > 1 {
        v.push(Violation::Header {
            field: "has_labels",
            value: flag as u64,
            expected: 1,
        });
        return;
    }
    report.labeled = flag == 1;
    if !dims_ok {
        return;
    }
    let per_block = BLOCK_TOKENS * 4 + usize::from(report.labeled) * 4 + BLOCK_TOKENS * EMBED_DIM * 4;
    let expected_len = HEADER_BYTES as u64 + report.declared_blocks as u64 * per_block as u64;
    if (b.len() as u64) < expected_len {
        v.push(Violation::Truncated {
            expected: expected_len,
            actual: b.len() as u64,
        });
    } else if (b.len() as u64) > expected_len {
        v.push(Violation::TrailingBytes {
            extra: b.len() as u64 - expected_len,
        });
    }

    let mut off = HEADER_BYTES;
    for block in 0..report.declared_blocks {
        if off + per_block > b.len() {
            break;
        }
        for position in 0..BLOCK_TOKENS {
            let id = u32_at(b, off + 4 * position);
            if id as usize >= VOCAB_SIZE {
                v.push(Violation::TokenOutOfRange { block, position, id });
            }
        }
        off += BLOCK_TOKENS * 4;
        if report.labeled {
            *report.label_histogram.entry(u32_at(b, off)).or_default() += 1;
            off += 4;
        }
        let mut norm_sum = 0.0;
        for token in 0..BLOCK_TOKENS {
            let mut sq = 0.0;
            for dim in 0..EMBED_DIM {
                let x = f32::from_le_bytes(b[off..off + 4].try_into().unwrap());
                off += 4;
                if x.is_finite() {
                    sq += (x as f64) * (x as f64);
                } else {
                    v.push(Violation::NonFinite { block, token, dim });
                }
            }
            norm_sum += sq.sqrt();
        }
        report.block_norms.push(norm_sum / BLOCK_TOKENS as f64);
        report.blocks_read += 1;
    }
}

fn rescan_labels(b: &[u8], classes: usize, report: &mut FixtureReport) {
    let per_block = BLOCK_TOKENS * 4 + 4 + BLOCK_TOKENS * EMBED_DIM * 4;
    for block in 0..report.blocks_read {
        let label = u32_at(b, HEADER_BYTES + block * per_block + BLOCK_TOKENS * 4);
        if label as usize >= classes {
            report.violations.push(Violation::LabelOutOfRange { block, label, classes });
        }
    }
}
