use std::collections::BTreeMap;

use super::forward::last_position_logits;
use super::spec::DecoderSpec;
use super::TransformerParams;
use crate::embedding_io::EmbeddingBlock;
use crate::error::{Error, Result};
use crate::numerics::{argmax, Matrix};
use crate::pca::{pca_transform, PcaBank};

/// Mean contextual embedding of each token id over a set of blocks.
///
/// Generated tokens have no contextual embedding of their own, so the
/// decoder is fed this average instead.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingTable {
    dim: usize,
    rows: BTreeMap<u32, Vec<f64>>,
}

impl TokenEmbeddingTable {
    pub fn from_blocks(blocks: &[EmbeddingBlock]) -> Self {
        let dim = blocks.first().map_or(0, |b| b.embeddings().cols());
        let mut sums: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
        for b in blocks {
            for (t, &id) in b.token_ids().iter().enumerate() {
                let (sum, n) = sums.entry(id).or_insert_with(|| (vec![0.0; dim], 0));
                for (s, v) in sum.iter_mut().zip(b.embeddings().row(t)) {
                    *s += v;
                }
                *n += 1;
            }
        }
        let rows = sums
            .into_iter()
            .map(|(id, (sum, n))| (id, sum.into_iter().map(|s| s / n as f64).collect()))
            .collect();
        Self { dim, rows }
    }

    /// Explicit rows; all must share one width.
    pub fn from_rows(rows: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        let dim = rows.values().next().map_or(0, Vec::len);
        if let Some((id, r)) = rows.iter().find(|(_, r)| r.len() != dim) {
            return Err(Error::shape(format!("row for token {id} has width {}, expected {dim}", r.len())));
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&[f64]> {
        self.rows.get(&id).map(Vec::as_slice)
    }
}

/// Leading tokens of a block together with their embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    ids: Vec<u32>,
    embeddings: Matrix,
}

impl Prompt {
    pub fn new(ids: Vec<u32>, embeddings: Matrix) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::param("prompt must contain at least one token"));
        }
        if embeddings.rows() != ids.len() {
            return Err(Error::shape(format!(
                "{} prompt ids but {} embedding rows",
                ids.len(),
                embeddings.rows()
            )));
        }
        Ok(Self { ids, embeddings })
    }

    /// The first `len` tokens of `block`.
    pub fn from_block(block: &EmbeddingBlock, len: usize) -> Result<Self> {
        if len > block.token_ids().len() {
            return Err(Error::param(format!(
                "prompt of {len} tokens from a {}-token block",
                block.token_ids().len()
            )));
        }
        let rows: Vec<usize> = (0..len).collect();
        Self::new(block.token_ids()[..len].to_vec(), block.embeddings().select_rows(&rows))
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Greedy decoding: appends the arg-max token (lowest id on ties) `steps`
/// times, stopping early at `seq_len`. Returns prompt and continuation.
///
/// Each position `t` is compressed with the bank's model for `t`. Generated
/// tokens are embedded through `table`; ids missing from it enter as a zero
/// row.
pub fn generate(
    spec: &DecoderSpec,
    params: &TransformerParams,
    bank: &PcaBank,
    prompt: &Prompt,
    steps: usize,
    table: &TokenEmbeddingTable,
) -> Result<Vec<u32>> {
    params.expect_arch(&spec.arch())?;
    if prompt.is_empty() {
        return Err(Error::param("prompt must contain at least one token"));
    }
    if bank.k() != spec.input_dim || bank.segments() < spec.seq_len {
        return Err(Error::param(format!(
            "bank with {} segments of {} components cannot feed a decoder of width {} over {} positions",
            bank.segments(),
            bank.k(),
            spec.input_dim,
            spec.seq_len
        )));
    }
    if prompt.len() > spec.seq_len {
        return Err(Error::param(format!(
            "prompt of {} tokens exceeds seq_len {}",
            prompt.len(),
            spec.seq_len
        )));
    }
    let mut ids = prompt.ids.clone();
    let mut z = Matrix::zeros(0, spec.input_dim);
    for t in 0..prompt.len() {
        let row = Matrix::row_vector(prompt.embeddings.row(t));
        z = append_row(&z, pca_transform(bank.model(t), &row)?.row(0));
    }
    let target = (prompt.len() + steps).min(spec.seq_len);
    while ids.len() < target {
        let logits = last_position_logits(params, &z)?;
        let next = argmax(&logits) as u32;
        ids.push(next);
        if ids.len() == target {
            break;
        }
        let t = ids.len() - 1;
        let zrow = match table.get(next) {
            Some(e) => pca_transform(bank.model(t), &Matrix::row_vector(e))?.row(0).to_vec(),
            None => vec![0.0; spec.input_dim],
        };
        z = append_row(&z, &zrow);
    }
    Ok(ids)
}

fn append_row(m: &Matrix, row: &[f64]) -> Matrix {
    let mut data = m.as_slice().to_vec();
    data.extend_from_slice(row);
    Matrix::from_fn(m.rows() + 1, row.len(), |r, c| data[r * row.len() + c])
}
