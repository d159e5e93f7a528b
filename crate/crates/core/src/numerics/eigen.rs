//! Symmetric eigendecomposition by Householder tridiagonalization followed
//! by the implicit QL algorithm (the EISPACK `tred2`/`tql2` pair).

use super::Matrix;
use crate::error::{Error, Result};

/// Relative asymmetry tolerated on input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// QL sweeps allowed per eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

/// Eigenvalues sorted descending, eigenvectors as orthonormal columns with
/// the largest-magnitude entry of each column made positive.
pub fn symmetric_eigendecompose(a: &Matrix) -> Result<SymmetricEigen> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::shape(format!(
            "eigendecomposition needs a square matrix, got {rows}x{cols}"
        )));
    }
    if !a.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(Error::shape(format!(
            "{rows}x{cols} matrix is not symmetric within {SYMMETRY_TOLERANCE}"
        )));
    }
    let n = rows;
    if n == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }

    // Work on the symmetrized lower triangle so tiny asymmetries cannot leak in.
    let mut v = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..=r {
            let x = 0.5 * (a[(r, c)] + a[(c, r)]);
            v[r * n + c] = x;
            v[c * n + r] = x;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e).map_err(|iterations| Error::Convergence {
        rows: n,
        cols: n,
        iterations,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for k in 1..n {
            if v[k * n + src].abs() > v[pivot * n + src].abs() {
                pivot = k;
            }
        }
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, dst)] = sign * v[k * n + src];
        }
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Err carries the iteration count reached.
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> std::result::Result<(), usize> {
    let at = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(iter - 1);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &Matrix, eig: &SymmetricEigen) -> f64 {
        let n = a.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let v = eig.eigenvectors.column(i);
            for r in 0..n {
                let av: f64 = (0..n).map(|c| a[(r, c)] * v[c]).sum();
                worst = worst.max((av - eig.eigenvalues[i] * v[r]).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = symmetric_eigendecompose(&Matrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        let vtv = eig.eigenvectors.t_matmul(&eig.eigenvectors).unwrap();
        assert!(vtv.max_abs_diff(&Matrix::identity(3)).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_gives_signed_permutation() {
        let a = Matrix::from_diag(&[5.0, 2.0, 9.0]);
        let eig = symmetric_eigendecompose(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![9.0, 5.0, 2.0]);
        let expected = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert_eq!(eig.eigenvectors, expected);
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        // det([[2-λ,1],[1,2-λ]]) = (2-λ)² - 1 → λ ∈ {3, 1}
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = symmetric_eigendecompose(&a).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.eigenvectors[(0, 0)] - h).abs() < 1e-14);
        assert!((eig.eigenvectors[(1, 0)] - h).abs() < 1e-14);
        assert!(residual(&a, &eig) < 1e-13);
    }

    #[test]
    fn rejects_non_square_and_asymmetric() {
        assert!(matches!(
            symmetric_eigendecompose(&Matrix::zeros(2, 3)),
            Err(Error::Shape(_))
        ));
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eigendecompose(&a), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_and_one_by_one() {
        let eig = symmetric_eigendecompose(&Matrix::zeros(4, 4)).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| l == 0.0));
        let eig = symmetric_eigendecompose(&Matrix::filled(1, 1, -2.5)).unwrap();
        assert_eq!(eig.eigenvalues, vec![-2.5]);
        assert_eq!(eig.eigenvectors.as_slice(), &[1.0]);
    }
}
