use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// `N × S × D` samples-by-segments-by-features, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    s: usize,
    d: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(n: usize, s: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * s * d {
            return Err(Error::shape(format!(
                "tensor data length {} does not match {n}x{s}x{d}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / (s * d),
                col: i % (s * d),
            });
        }
        Ok(Self { n, s, d, data })
    }

    pub fn zeros(n: usize, s: usize, d: usize) -> Self {
        Self {
            n,
            s,
            d,
            data: vec![0.0; n * s * d],
        }
    }

    /// Stacks `S × D` samples.
    pub fn from_samples(samples: &[Matrix]) -> Result<Self> {
        let (s, d) = samples.first().map_or((0, 0), Matrix::shape);
        let mut data = Vec::with_capacity(samples.len() * s * d);
        for (i, m) in samples.iter().enumerate() {
            if m.shape() != (s, d) {
                return Err(Error::shape(format!(
                    "sample {i} has shape {:?}, expected {:?}",
                    m.shape(),
                    (s, d)
                )));
            }
            data.extend_from_slice(m.as_slice());
        }
        Ok(Self {
            n: samples.len(),
            s,
            d,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n, self.s, self.d)
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn segments(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, s: usize, d: usize) -> f64 {
        self.data[(i * self.s + s) * self.d + d]
    }

    pub fn set(&mut self, i: usize, s: usize, d: usize, v: f64) {
        self.data[(i * self.s + s) * self.d + d] = v;
    }

    /// The `S × D` block of sample `i`.
    pub fn sample(&self, i: usize) -> Matrix {
        let len = self.s * self.d;
        Matrix::from_vec(self.s, self.d, self.data[i * len..(i + 1) * len].to_vec())
    }

    /// The `N × D` slice at segment `s`.
    pub fn segment(&self, s: usize) -> Matrix {
        let mut out = Vec::with_capacity(self.n * self.d);
        for i in 0..self.n {
            let start = (i * self.s + s) * self.d;
            out.extend_from_slice(&self.data[start..start + self.d]);
        }
        Matrix::from_vec(self.n, self.d, out)
    }

    pub(crate) fn set_segment(&mut self, s: usize, m: &Matrix) {
        debug_assert_eq!(m.shape(), (self.n, self.d));
        for i in 0..self.n {
            let start = (i * self.s + s) * self.d;
            self.data[start..start + self.d].copy_from_slice(m.row(i));
        }
    }

    /// Flattens each sample to one row of `S·D` values, segment-major.
    pub fn flatten_samples(&self) -> Matrix {
        Matrix::from_vec(self.n, self.s * self.d, self.data.clone())
    }

    pub fn select_samples(&self, idx: &[usize]) -> Tensor3 {
        let len = self.s * self.d;
        let mut data = Vec::with_capacity(idx.len() * len);
        for &i in idx {
            data.extend_from_slice(&self.data[i * len..(i + 1) * len]);
        }
        Tensor3 {
            n: idx.len(),
            s: self.s,
            d: self.d,
            data,
        }
    }
}
