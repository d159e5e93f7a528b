//! Per-slice PCA and banks of independent PCAs indexed by segment.

mod bank;
mod format;
mod tensor;

pub use bank::{bank_fit, bank_inverse, bank_transform, PcaBank, SegmentAxis};
pub use tensor::Tensor3;

use crate::error::{Error, Result};
use crate::numerics::{dot, symmetric_eigendecompose, Matrix};

/// Mean, principal directions (rows of `components`) and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    components: Matrix,
    eigenvalues: Vec<f64>,
    fitted_on: Option<usize>,
}

impl PcaModel {
    pub(crate) fn from_parts(
        mean: Vec<f64>,
        components: Matrix,
        eigenvalues: Vec<f64>,
        fitted_on: Option<usize>,
    ) -> Result<Self> {
        if components.cols() != mean.len() || components.rows() != eigenvalues.len() {
            return Err(Error::shape(format!(
                "components {:?} inconsistent with mean {} and {} eigenvalues",
                components.shape(),
                mean.len(),
                eigenvalues.len()
            )));
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
            fitted_on,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `k × D`, orthonormal rows.
    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Sample count the model was fitted on; `None` after deserialization.
    pub fn fitted_on(&self) -> Option<usize> {
        self.fitted_on
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// The leading `k` components of this model.
    pub fn truncated(&self, k: usize) -> Result<PcaModel> {
        if k == 0 || k > self.k() {
            return Err(Error::param(format!("cannot truncate {} components to {k}", self.k())));
        }
        let d = self.dim();
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: Matrix::from_vec(k, d, self.components.as_slice()[..k * d].to_vec()),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            fitted_on: self.fitted_on,
        })
    }
}

/// Top-`k` principal components of the rows of `x`, covariance scaled by `1/(N−1)`.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::param(format!(
            "k = {k} outside 1..={} for {n} samples of dimension {d}",
            n.min(d)
        )));
    }
    let mean = x.column_means();
    let centered = x.sub_row(&mean)?;
    let (components, eigenvalues) = match (n < d).then(|| fit_dual(&centered, k)).transpose()? {
        Some(Some(fit)) => fit,
        _ => fit_primal(&centered, k)?,
    };
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        fitted_on: Some(n),
    })
}

/// Eigenvectors of the `D × D` covariance.
fn fit_primal(centered: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>)> {
    let (n, d) = centered.shape();
    let cov = centered.t_matmul_unchecked(centered).scale(1.0 / (n - 1) as f64);
    let eig = symmetric_eigendecompose(&cov)?;
    let mut components = Matrix::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            components[(i, j)] = eig.eigenvectors[(j, i)];
        }
    }
    // tiny negative eigenvalues of a PSD matrix are rounding noise
    let eigenvalues = eig.eigenvalues[..k].iter().map(|&l| l.max(0.0)).collect();
    Ok((components, eigenvalues))
}

/// Relative eigenvalue below which the Gram route cannot recover a direction.
const DUAL_CUTOFF: f64 = 1e-10;

/// Same decomposition through the `N × N` Gram matrix, for `N < D`.
///
/// `None` when a requested component lies in the numerical null space; the
/// caller then falls back to the covariance route.
fn fit_dual(centered: &Matrix, k: usize) -> Result<Option<(Matrix, Vec<f64>)>> {
    let n = centered.rows();
    let scale = 1.0 / (n - 1) as f64;
    let gram = centered.matmul_t_unchecked(centered).scale(scale);
    let eig = symmetric_eigendecompose(&gram)?;
    let top = eig.eigenvalues[0];
    if !(top > 0.0) || eig.eigenvalues[k - 1] <= DUAL_CUTOFF * top {
        return Ok(None);
    }
    let mut u = Matrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            u[(i, j)] = eig.eigenvectors[(j, i)];
        }
    }
    // rows of U·Xc are the covariance eigenvectors up to scale
    let mut components = u.matmul_unchecked(centered);
    for i in 0..k {
        for p in 0..i {
            let proj = dot(components.row(i), components.row(p));
            let prev = components.row(p).to_vec();
            for (c, q) in components.row_mut(i).iter_mut().zip(prev) {
                *c -= proj * q;
            }
        }
        let row = components.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let big = row.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        for v in row.iter_mut() {
            *v *= sign / norm;
        }
    }
    Ok(Some((components, eig.eigenvalues[..k].to_vec())))
}

/// `Z = (X − μ)Wᵀ`.
pub fn pca_transform(m: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != m.dim() {
        return Err(Error::shape(format!(
            "transform expects {} columns, got {}",
            m.dim(),
            x.cols()
        )));
    }
    Ok(x.sub_row(&m.mean)?.matmul_t_unchecked(&m.components))
}

/// `X̂ = Z·W + μ`.
pub fn pca_inverse_transform(m: &PcaModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != m.k() {
        return Err(Error::shape(format!(
            "inverse transform expects {} columns, got {}",
            m.k(),
            z.cols()
        )));
    }
    z.matmul_unchecked(&m.components).add_row(&m.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_points_have_zero_variance() {
        let x = Matrix::from_rows(&[vec![3.0, 7.0], vec![3.0, 7.0], vec![3.0, 7.0]]).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        assert_eq!(m.mean(), &[3.0, 7.0]);
        assert_eq!(m.eigenvalues(), &[0.0]);
    }

    #[test]
    fn line_y_equals_2x() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0], vec![0.0, 0.0]]).unwrap();
        let m = pca_fit(&x, 2).unwrap();
        let s5 = 5f64.sqrt();
        assert!((m.components()[(0, 0)] - 1.0 / s5).abs() < 1e-12);
        assert!((m.components()[(0, 1)] - 2.0 / s5).abs() < 1e-12);
        assert!(m.eigenvalues()[1].abs() < 1e-12);
        // μ = (0.5, 1); x−μ = (1.5, 3) projects onto (1,2)/√5 as 7.5/√5
        assert_eq!(m.mean(), &[0.5, 1.0]);
        let z = pca_transform(&m.truncated(1).unwrap(), &Matrix::from_rows(&[vec![2.0, 4.0]]).unwrap()).unwrap();
        assert!((z[(0, 0)] - 7.5 / s5).abs() < 1e-12);
        // sample variance of the projections: (x·u) for the 4 points is (5,10,-5,0)/√5 − 2.5/√5
        let lambda = [2.5f64, 7.5, -7.5, -2.5].iter().map(|v| v * v / 5.0).sum::<f64>() / 3.0;
        assert!((m.eigenvalues()[0] - lambda).abs() < 1e-12);
    }

    #[test]
    fn full_rank_is_lossless() {
        let x = rand_matrix(50, 10, 7);
        let m = pca_fit(&x, 10).unwrap();
        let back = pca_inverse_transform(&m, &pca_transform(&m, &x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x).unwrap() < 1e-8);
    }

    #[test]
    fn mean_row_maps_to_origin_and_back() {
        let x = rand_matrix(20, 4, 3);
        let m = pca_fit(&x, 2).unwrap();
        let mu = Matrix::row_vector(m.mean());
        assert!(pca_transform(&m, &mu).unwrap().max_abs() < 1e-12);
        let zeros = Matrix::zeros(3, 2);
        let back = pca_inverse_transform(&m, &zeros).unwrap();
        for r in 0..3 {
            assert_eq!(back.row(r), m.mean());
        }
    }

    #[test]
    fn reconstruction_mse_equals_discarded_variance() {
        let x = rand_matrix(100, 20, 11);
        let (n, d) = x.shape();
        let full = pca_fit(&x, 20).unwrap();
        for k in [1, 5, 13, 19] {
            let m = full.truncated(k).unwrap();
            let back = pca_inverse_transform(&m, &pca_transform(&m, &x).unwrap()).unwrap();
            let sse: f64 = back.sub(&x).unwrap().as_slice().iter().map(|v| v * v).sum();
            let mse = sse / (n * d) as f64;
            let discarded: f64 = full.eigenvalues()[k..].iter().sum();
            let expected = discarded * (n - 1) as f64 / n as f64 / d as f64;
            assert!((mse - expected).abs() <= 1e-6 * expected, "k={k}: {mse} vs {expected}");
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let x = rand_matrix(12, 40, 21);
        let centered = x.sub_row(&x.column_means()).unwrap();
        let (w_dual, l_dual) = fit_dual(&centered, 8).unwrap().expect("full-rank sample");
        let (w_primal, l_primal) = fit_primal(&centered, 8).unwrap();
        assert!(w_dual.max_abs_diff(&w_primal).unwrap() < 1e-9);
        for (a, b) in l_dual.iter().zip(&l_primal) {
            assert!((a - b).abs() < 1e-10 * l_primal[0]);
        }
        // the 12th direction has zero variance after centring
        assert!(fit_dual(&centered, 12).unwrap().is_none());
        let m = pca_fit(&x, 12).unwrap();
        let gram = m.components().matmul_t(m.components()).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(12)).unwrap() < 1e-10);
    }

    #[test]
    fn argument_errors() {
        let x = rand_matrix(5, 3, 1);
        assert!(matches!(pca_fit(&x, 0), Err(Error::Parameter(_))));
        assert!(matches!(pca_fit(&x, 4), Err(Error::Parameter(_))));
        assert!(matches!(
            pca_fit(&rand_matrix(1, 3, 1), 1),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        let m = pca_fit(&x, 2).unwrap();
        assert!(matches!(pca_transform(&m, &Matrix::zeros(1, 4)), Err(Error::Shape(_))));
        assert!(matches!(pca_inverse_transform(&m, &Matrix::zeros(1, 3)), Err(Error::Shape(_))));
        assert!(m.truncated(3).is_err());
    }
}
