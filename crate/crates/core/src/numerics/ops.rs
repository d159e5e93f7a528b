use super::{dot, Matrix};
use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`cosine_similarity`].
pub const COSINE_ZERO_NORM: f64 = 1e-30;

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Softmax over the allowed prefix `0..=limit` of a row; masked entries are 0.
pub(crate) fn masked_softmax_in_place(row: &mut [f64], limit: usize) {
    softmax_in_place(&mut row[..=limit]);
    for v in row[limit + 1..].iter_mut() {
        *v = 0.0;
    }
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either norm is below [`COSINE_ZERO_NORM`].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "cosine_similarity: lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na < COSINE_ZERO_NORM || nb < COSINE_ZERO_NORM {
        return Ok(0.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
