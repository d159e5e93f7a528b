//! Measurement procedures over the trained pipelines and their CSV / SVG
//! artifacts.

mod emit;
mod reconstruction;

pub use emit::{emit_csv, emit_plot, parse_csv, Tabular};
pub use reconstruction::{
    match_rate, reconstruction_curve, token_reconstruction_accuracy, MatchPool, ReconstructionCurve,
    ReconstructionPoint,
};

use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, Matrix};
use crate::polar_mnist::SaturationPoint;
use crate::tinyformer::{count_params, DecoderSpec, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamPoint {
    pub depth: usize,
    pub params_compressed: usize,
    pub params_full: usize,
}

/// Decoder totals per depth for a compressed and a full-width input.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamCurve {
    pub points: Vec<ParamPoint>,
}

/// Counts both decoders at each depth; only `layers` of the two specs is
/// overridden.
pub fn params_vs_depth(depths: &[usize], compressed: &DecoderSpec, full: &DecoderSpec) -> Result<ParamCurve> {
    if depths.first() == Some(&0) || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("depths must be positive and strictly ascending"));
    }
    let total = |spec: &DecoderSpec, layers| -> Result<usize> {
        let s = DecoderSpec { layers, ..*spec };
        s.validate()?;
        Ok(count_params(&ModelSpec::Decoder(s)).total)
    };
    let points = depths
        .iter()
        .map(|&depth| {
            Ok(ParamPoint {
                depth,
                params_compressed: total(compressed, depth)?,
                params_full: total(full, depth)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ParamCurve { points })
}

/// Accuracy and training time per training-set size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaturationCurve {
    pub points: Vec<SaturationPoint>,
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossCurve {
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub mean: f64,
    pub min: f64,
    pub per_token: Vec<f64>,
}

/// Row-wise cosine between two equally shaped matrices.
pub fn embedding_similarity_report(original: &Matrix, reconstructed: &Matrix) -> Result<SimilarityReport> {
    if original.shape() != reconstructed.shape() {
        return Err(Error::shape(format!(
            "similarity of {:?} against {:?}",
            original.shape(),
            reconstructed.shape()
        )));
    }
    if original.rows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let per_token = (0..original.rows())
        .map(|r| cosine_similarity(original.row(r), reconstructed.row(r)))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_token.iter().sum::<f64>() / per_token.len() as f64;
    let min = per_token.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SimilarityReport { mean, min, per_token })
}

/// Ordinary least-squares `R²` of `y` against `x`.
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param("R² needs at least two paired values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::param("R² undefined for constant data"));
    }
    Ok(sxy * sxy / (sxx * syy))
}

#[cfg(test)]
mod tests;
