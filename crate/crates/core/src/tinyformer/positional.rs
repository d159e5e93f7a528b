use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// `PE[t, 2i] = sin(t / 10000^(2i/d))`, `PE[t, 2i+1] = cos(t / 10000^(2i/d))`.
pub fn sinusoidal_positional_encoding(t: usize, d: usize) -> Result<Matrix> {
    if d % 2 != 0 {
        return Err(Error::param(format!("positional encoding needs an even width, got {d}")));
    }
    let mut pe = Matrix::zeros(t, d);
    for pos in 0..t {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10_000f64.powf(2.0 * i as f64 / d as f64);
            pe[(pos, 2 * i)] = angle.sin();
            pe[(pos, 2 * i + 1)] = angle.cos();
        }
    }
    Ok(pe)
}

/// `T × T` lower-triangular mask: query `q` may attend to key `p` iff `p ≤ q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalMask {
    n: usize,
}

impl CausalMask {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn allowed(&self, q: usize, p: usize) -> bool {
        q < self.n && p <= q
    }

    pub fn allowed_count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|q| (0..self.n).map(|p| self.allowed(q, p)).collect()).collect()
    }
}

pub fn causal_mask(t: usize) -> Result<CausalMask> {
    if t == 0 {
        return Err(Error::param("causal mask needs at least one position"));
    }
    Ok(CausalMask { n: t })
}
