//! Token-embedding blocks and the `PEB1` container they travel in.
//!
//! Layout (little-endian): `"PEB1"`, `u32 block_count`, `u32 T`, `u32 D`,
//! `u32 V`, `u8 has_labels`, then per block `T × u32` token ids, an optional
//! `u32` label and `T × D` row-major `f32` embeddings.

mod manifest;
mod validate;
mod vocab;

pub use manifest::{manifest_path_for, DatasetManifest};
pub use validate::{validate_fixture, FixtureReport, Violation};
pub use vocab::{escape_token_bytes, unescape_token, Vocabulary};

use std::path::Path;

use crate::binio::{put_u32, read_file, to_u32, write_file, ByteReader};
use crate::error::{Error, ParseError, Result};
use crate::numerics::Matrix;
use crate::pca::Tensor3;

pub const BLOCK_MAGIC: &[u8; 4] = b"PEB1";
pub const BLOCK_TOKENS: usize = 100;
pub const EMBED_DIM: usize = 384;
pub const VOCAB_SIZE: usize = 50_257;
pub const HEADER_BYTES: usize = 21;

/// One `T`-token span with its per-token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBlock {
    token_ids: Vec<u32>,
    embeddings: Matrix,
    label: Option<u32>,
}

impl EmbeddingBlock {
    /// Checks `T = 100`, `D = 384`, ids `< 50257` and that every embedding is
    /// representable as a finite `f32`.
    pub fn new(token_ids: Vec<u32>, embeddings: Matrix, label: Option<u32>) -> Result<Self> {
        if token_ids.len() != BLOCK_TOKENS || embeddings.shape() != (BLOCK_TOKENS, EMBED_DIM) {
            return Err(Error::shape(format!(
                "block needs {BLOCK_TOKENS} ids and {BLOCK_TOKENS}x{EMBED_DIM} embeddings, got {} and {:?}",
                token_ids.len(),
                embeddings.shape()
            )));
        }
        if let Some(p) = token_ids.iter().position(|&id| id as usize >= VOCAB_SIZE) {
            return Err(Error::param(format!(
                "token id {} at position {p} is outside the {VOCAB_SIZE}-token vocabulary",
                token_ids[p]
            )));
        }
        if let Some(i) = embeddings.as_slice().iter().position(|&v| !(v as f32).is_finite()) {
            return Err(Error::NonFinite {
                row: i / EMBED_DIM,
                col: i % EMBED_DIM,
            });
        }
        Ok(Self {
            token_ids,
            embeddings,
            label,
        })
    }

    pub fn token_ids(&self) -> &[u32] {
        &self.token_ids
    }

    /// `T × D`, promoted from the stored `f32`.
    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn with_label(mut self, label: Option<u32>) -> Self {
        self.label = label;
        self
    }
}

/// Stacks block embeddings as `N × T × D` for the per-position bank.
pub fn blocks_to_tensor(blocks: &[EmbeddingBlock]) -> Result<Tensor3> {
    let samples: Vec<Matrix> = blocks.iter().map(|b| b.embeddings.clone()).collect();
    Tensor3::from_samples(&samples)
}

fn block_bytes(labeled: bool) -> usize {
    BLOCK_TOKENS * 4 + usize::from(labeled) * 4 + BLOCK_TOKENS * EMBED_DIM * 4
}

/// All blocks must agree on whether they carry a label.
pub fn encode_blocks(blocks: &[EmbeddingBlock]) -> Result<Vec<u8>> {
    let labeled = blocks.first().is_some_and(|b| b.label.is_some());
    if let Some(i) = blocks.iter().position(|b| b.label.is_some() != labeled) {
        return Err(Error::param(format!(
            "block {i} {} a label but block 0 {}",
            if labeled { "lacks" } else { "has" },
            if labeled { "has one" } else { "does not" }
        )));
    }
    let mut out = Vec::with_capacity(HEADER_BYTES + blocks.len() * block_bytes(labeled));
    out.extend_from_slice(BLOCK_MAGIC);
    put_u32(&mut out, to_u32("block_count", blocks.len())?);
    put_u32(&mut out, BLOCK_TOKENS as u32);
    put_u32(&mut out, EMBED_DIM as u32);
    put_u32(&mut out, VOCAB_SIZE as u32);
    out.push(u8::from(labeled));
    for b in blocks {
        for id in &b.token_ids {
            put_u32(&mut out, *id);
        }
        if let Some(l) = b.label {
            put_u32(&mut out, l);
        }
        for v in b.embeddings.as_slice() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) struct Header {
    pub block_count: usize,
    pub labeled: bool,
}

/// Reads and checks the fixed header fields.
pub(crate) fn read_header(r: &mut ByteReader) -> Result<Header> {
    r.magic(BLOCK_MAGIC)?;
    let block_count = r.u32_le()? as usize;
    for (field, expected, offset) in [
        ("T", BLOCK_TOKENS, 8u64),
        ("D", EMBED_DIM, 12),
        ("V", VOCAB_SIZE, 16),
    ] {
        let v = r.u32_le()?;
        if v as usize != expected {
            return Err(r.fail(ParseError::BadHeader {
                field,
                value: v as u64,
                offset,
            }));
        }
    }
    let flag = r.u8()?;
    if flag > 1 {
        return Err(r.fail(ParseError::BadHeader {
            field: "has_labels",
            value: flag as u64,
            offset: 20,
        }));
    }
    Ok(Header {
        block_count,
        labeled: flag == 1,
    })
}

/// `path` only labels errors.
pub fn decode_blocks(bytes: &[u8], path: &Path) -> Result<Vec<EmbeddingBlock>> {
    let mut r = ByteReader::new(bytes, path);
    let h = read_header(&mut r)?;
    let expected = h.block_count as u64 * block_bytes(h.labeled) as u64;
    let have = r.remaining() as u64;
    if have > expected {
        return Err(r.fail(ParseError::TrailingBytes {
            offset: r.offset() + expected,
            extra: have - expected,
        }));
    }
    r.require(expected)?;
    let mut blocks = Vec::with_capacity(h.block_count);
    for _ in 0..h.block_count {
        let mut ids = Vec::with_capacity(BLOCK_TOKENS);
        for _ in 0..BLOCK_TOKENS {
            let offset = r.offset();
            let id = r.u32_le()?;
            if id as usize >= VOCAB_SIZE {
                return Err(r.fail(ParseError::TokenOutOfRange {
                    id,
                    vocab: VOCAB_SIZE as u32,
                    offset,
                }));
            }
            ids.push(id);
        }
        let label = if h.labeled { Some(r.u32_le()?) } else { None };
        let start = r.offset();
        let raw = r.take(BLOCK_TOKENS * EMBED_DIM * 4)?;
        let mut data = Vec::with_capacity(BLOCK_TOKENS * EMBED_DIM);
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(r.fail(ParseError::NonFinite {
                    offset: start + 4 * i as u64,
                }));
            }
            data.push(v as f64);
        }
        blocks.push(EmbeddingBlock {
            token_ids: ids,
            embeddings: Matrix::new(BLOCK_TOKENS, EMBED_DIM, data)?,
            label,
        });
    }
    r.finish()?;
    Ok(blocks)
}

pub fn write_blocks(blocks: &[EmbeddingBlock], path: &Path) -> Result<()> {
    write_file(path, &encode_blocks(blocks)?)
}

pub fn read_blocks(path: &Path) -> Result<Vec<EmbeddingBlock>> {
    decode_blocks(&read_file(path)?, path)
}
