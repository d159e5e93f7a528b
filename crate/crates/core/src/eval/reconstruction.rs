use std::fmt;
use std::str::FromStr;

use crate::embedding_io::EmbeddingBlock;
use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, Matrix};
use crate::pca::{pca_fit, pca_inverse_transform, pca_transform, PcaModel};

/// Originals a reconstructed test token is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchPool {
    /// The test sentence's own original embeddings.
    #[default]
    TestTokens,
    /// Reference originals followed by test originals.
    Union,
}

impl MatchPool {
    pub fn label(self) -> &'static str {
        match self {
            MatchPool::TestTokens => "test",
            MatchPool::Union => "union",
        }
    }
}

impl fmt::Display for MatchPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MatchPool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(MatchPool::TestTokens),
            "union" => Ok(MatchPool::Union),
            _ => Err(Error::param(format!("unknown match pool {s:?} (expected test or union)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionPoint {
    pub k: usize,
    pub match_rate: f64,
}

/// Match rate per PCA rank, `k` strictly ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructionCurve {
    pub points: Vec<ReconstructionPoint>,
}

impl ReconstructionCurve {
    pub fn validate(&self) -> Result<()> {
        if self.points.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(Error::param("reconstruction curve k values must be strictly ascending"));
        }
        if let Some(p) = self.points.iter().find(|p| !(0.0..=1.0).contains(&p.match_rate)) {
            return Err(Error::param(format!("match rate {} at k={} outside [0, 1]", p.match_rate, p.k)));
        }
        Ok(())
    }

    pub fn rate_at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.match_rate)
    }
}

/// Common subspace of two sentences, fitted on the union of their token rows.
struct UnionFit {
    model: PcaModel,
    pool: Matrix,
    offset: usize,
}

impl UnionFit {
    fn new(reference: &Matrix, test: &Matrix, k_max: usize, pool: MatchPool) -> Result<Self> {
        if reference.cols() != test.cols() {
            return Err(Error::shape(format!(
                "reference width {} differs from test width {}",
                reference.cols(),
                test.cols()
            )));
        }
        if test.rows() == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let union = Matrix::from_fn(reference.rows() + test.rows(), test.cols(), |r, c| {
            if r < reference.rows() {
                reference[(r, c)]
            } else {
                test[(r - reference.rows(), c)]
            }
        });
        let model = pca_fit(&union, effective_k(k_max, union.rows(), union.cols()))?;
        let (pool, offset) = match pool {
            MatchPool::TestTokens => (test.clone(), 0),
            MatchPool::Union => (union, reference.rows()),
        };
        Ok(Self { model, pool, offset })
    }

    fn rate(&self, test: &Matrix, k: usize) -> Result<f64> {
        let m = self.model.truncated(k.min(self.model.k()))?;
        let recon = pca_inverse_transform(&m, &pca_transform(&m, test)?)?;
        let mut hits = 0;
        for i in 0..test.rows() {
            if nearest(recon.row(i), &self.pool)? == i + self.offset {
                hits += 1;
            }
        }
        Ok(hits as f64 / test.rows() as f64)
    }
}

/// Ranks past `N − 1` add only zero-variance directions for `N` centred
/// rows, so requests above that are served at `N − 1`.
fn effective_k(k: usize, n: usize, d: usize) -> usize {
    k.min(n.saturating_sub(1)).min(d).max(1)
}

/// Row of `pool` with the highest cosine to `v`; ties go to the lowest index.
fn nearest(v: &[f64], pool: &Matrix) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..pool.rows() {
        let c = cosine_similarity(v, pool.row(j))?;
        if c > best.1 {
            best = (j, c);
        }
    }
    Ok(best.0)
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::param(format!("k = {k} outside 1..={d}")));
    }
    Ok(())
}

/// Fraction of test tokens whose rank-`k` reconstruction is closest (by
/// cosine) to its own original.
pub fn match_rate(reference: &Matrix, test: &Matrix, k: usize, pool: MatchPool) -> Result<f64> {
    check_k(k, test.cols())?;
    UnionFit::new(reference, test, k, pool)?.rate(test, k)
}

pub fn token_reconstruction_accuracy(
    reference: &EmbeddingBlock,
    test: &EmbeddingBlock,
    k: usize,
    pool: MatchPool,
) -> Result<f64> {
    match_rate(reference.embeddings(), test.embeddings(), k, pool)
}

/// Match rate for each `k`, sharing one eigendecomposition.
pub fn reconstruction_curve(reference: &Matrix, test: &Matrix, ks: &[usize], pool: MatchPool) -> Result<ReconstructionCurve> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("k values must be strictly ascending"));
    }
    for &k in ks {
        check_k(k, test.cols())?;
    }
    let Some(&k_max) = ks.last() else {
        return Ok(ReconstructionCurve::default());
    };
    let fit = UnionFit::new(reference, test, k_max, pool)?;
    let points = ks
        .iter()
        .map(|&k| {
            Ok(ReconstructionPoint {
                k,
                match_rate: fit.rate(test, k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReconstructionCurve { points })
}
