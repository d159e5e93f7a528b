use super::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-4;

/// Floor on the relative-error denominator. Central differences cannot
/// resolve derivatives much below this, so smaller ones are compared in
/// absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against central differences of `f` around `theta`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn finite_diff_grad_check<F>(f: F, theta: &[f64], analytic: &[f64], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::shape(format!(
            "gradient check: {} parameters but {} analytic entries",
            theta.len(),
            analytic.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::param("finite-difference step must be positive"));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
    };
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let plus = f(&probe);
        probe[i] = theta[i] - step;
        let minus = f(&probe);
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Evaluation { index: i });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        let rel = (a - numeric).abs() / denom;
        if i == 0 || rel > report.max_relative_error {
            report = GradCheckReport {
                max_relative_error: rel,
                worst_parameter_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

/// Checks each tensor of `params` separately, perturbing only that tensor.
/// Returns one report per tensor, in order.
pub fn grad_check_tensors<F>(loss: F, params: &[Matrix], analytic: &[Matrix], step: f64) -> Result<Vec<GradCheckReport>>
where
    F: Fn(&[Matrix]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::shape(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    params
        .iter()
        .zip(analytic)
        .enumerate()
        .map(|(i, (p, a))| {
            if p.shape() != a.shape() {
                return Err(Error::shape(format!(
                    "tensor {i}: parameter {:?} vs gradient {:?}",
                    p.shape(),
                    a.shape()
                )));
            }
            let probe = |flat: &[f64]| {
                let mut trial = params.to_vec();
                trial[i].as_mut_slice().copy_from_slice(flat);
                loss(&trial)
            };
            finite_diff_grad_check(probe, p.as_slice(), a.as_slice(), step)
        })
        .collect()
}
