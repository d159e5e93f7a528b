use std::fmt;
use std::str::FromStr;

use super::{pca_fit, pca_inverse_transform, pca_transform, PcaModel, Tensor3};
use crate::error::{Error, Result};

/// What the bank's segment index means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentAxis {
    AngularSegment,
    TokenPosition,
}

impl SegmentAxis {
    pub fn label(self) -> &'static str {
        match self {
            SegmentAxis::AngularSegment => "angular_segment",
            SegmentAxis::TokenPosition => "token_position",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            SegmentAxis::AngularSegment => 0,
            SegmentAxis::TokenPosition => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SegmentAxis::AngularSegment),
            1 => Some(SegmentAxis::TokenPosition),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SegmentAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular_segment" => Ok(SegmentAxis::AngularSegment),
            "token_position" => Ok(SegmentAxis::TokenPosition),
            other => Err(Error::param(format!("unknown segment axis {other:?}"))),
        }
    }
}

/// One independent [`PcaModel`] per segment, all sharing `D` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBank {
    models: Vec<PcaModel>,
    axis: SegmentAxis,
    k: usize,
}

impl PcaBank {
    pub fn new(models: Vec<PcaModel>, axis: SegmentAxis) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::param("a bank needs at least one model"))?;
        let (k, d) = (first.k(), first.dim());
        for (s, m) in models.iter().enumerate() {
            if m.k() != k || m.dim() != d {
                return Err(Error::shape(format!(
                    "model has k={} D={}, bank has k={k} D={d}",
                    m.k(),
                    m.dim()
                ))
                .in_segment(s));
            }
        }
        Ok(Self { models, axis, k })
    }

    pub fn models(&self) -> &[PcaModel] {
        &self.models
    }

    pub fn model(&self, segment: usize) -> &PcaModel {
        &self.models[segment]
    }

    pub fn axis(&self) -> SegmentAxis {
        self.axis
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn segments(&self) -> usize {
        self.models.len()
    }

    pub fn truncated(&self, k: usize) -> Result<PcaBank> {
        let models = self
            .models
            .iter()
            .enumerate()
            .map(|(s, m)| m.truncated(k).map_err(|e| e.in_segment(s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PcaBank {
            models,
            axis: self.axis,
            k,
        })
    }

    fn check(&self, x: &Tensor3, width: usize, what: &str) -> Result<()> {
        if x.segments() != self.segments() || x.dim() != width {
            return Err(Error::shape(format!(
                "{what} expects N x {} x {width}, got {:?}",
                self.segments(),
                x.shape()
            )));
        }
        Ok(())
    }
}

/// Fits one PCA per segment slice of `x`.
pub fn bank_fit(x: &Tensor3, k: usize, axis: SegmentAxis) -> Result<PcaBank> {
    if x.segments() == 0 {
        return Err(Error::param("cannot fit a bank over zero segments"));
    }
    let models = (0..x.segments())
        .map(|s| pca_fit(&x.segment(s), k).map_err(|e| e.in_segment(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PcaBank { models, axis, k })
}

pub fn bank_transform(b: &PcaBank, x: &Tensor3) -> Result<Tensor3> {
    b.check(x, b.dim(), "bank_transform")?;
    let mut out = Tensor3::zeros(x.samples(), x.segments(), b.k());
    for (s, m) in b.models.iter().enumerate() {
        let z = pca_transform(m, &x.segment(s)).map_err(|e| e.in_segment(s))?;
        out.set_segment(s, &z);
    }
    Ok(out)
}

pub fn bank_inverse(b: &PcaBank, z: &Tensor3) -> Result<Tensor3> {
    b.check(z, b.k(), "bank_inverse")?;
    let mut out = Tensor3::zeros(z.samples(), z.segments(), b.dim());
    for (s, m) in b.models.iter().enumerate() {
        let x = pca_inverse_transform(m, &z.segment(s)).map_err(|e| e.in_segment(s))?;
        out.set_segment(s, &x);
    }
    Ok(out)
}
