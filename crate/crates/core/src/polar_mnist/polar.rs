use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A 28×28 grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Vec<f64>,
}

impl GrayImage {
    pub const SIDE: usize = 28;
    pub const PIXELS: usize = 784;

    pub fn new(pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != Self::PIXELS {
            return Err(Error::shape(format!("image needs 784 pixels, got {}", pixels.len())));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param(format!(
                "pixel ({}, {}) = {} outside [0, 1]",
                i / Self::SIDE,
                i % Self::SIDE,
                pixels[i]
            )));
        }
        Ok(Self { pixels })
    }

    pub fn zeros() -> Self {
        Self {
            pixels: vec![0.0; Self::PIXELS],
        }
    }

    /// Raw 0–255 bytes scaled by 1/255.
    pub fn from_bytes(raw: &[u8]) -> Self {
        debug_assert_eq!(raw.len(), Self::PIXELS);
        Self {
            pixels: raw.iter().map(|&b| b as f64 / 255.0).collect(),
        }
    }

    /// Builds from `f(row, col)`, clamping into `[0, 1]`.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(Self::PIXELS);
        for r in 0..Self::SIDE {
            for c in 0..Self::SIDE {
                pixels.push(f(r, c).clamp(0.0, 1.0));
            }
        }
        Self { pixels }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * Self::SIDE + col]
    }

    /// Multiplies every pixel by `a` (kept in `[0, 1]` only if `0 ≤ a ≤ 1`).
    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.pixels.iter().map(|p| p * a).collect())
    }

    /// Bilinear read at column `x`, row `y`; pixels outside the grid are 0.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let px = |r: i64, c: i64| {
            let side = Self::SIDE as i64;
            if (0..side).contains(&r) && (0..side).contains(&c) {
                self.pixels[(r * side + c) as usize]
            } else {
                0.0
            }
        };
        let mut v = (1.0 - fx) * (1.0 - fy) * px(y0, x0);
        if fx > 0.0 {
            v += fx * (1.0 - fy) * px(y0, x0 + 1);
        }
        if fy > 0.0 {
            v += (1.0 - fx) * fy * px(y0 + 1, x0);
            if fx > 0.0 {
                v += fx * fy * px(y0 + 1, x0 + 1);
            }
        }
        v
    }
}

/// Sampling geometry of the Cartesian→polar transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGeometry {
    /// `(x, y)` = (column, row).
    pub center: (f64, f64),
    pub rho_max: f64,
    pub radial_bins: usize,
}

impl Default for PolarGeometry {
    fn default() -> Self {
        Self {
            center: (14.0, 14.0),
            rho_max: 14.0,
            radial_bins: 28,
        }
    }
}

impl PolarGeometry {
    pub const ANGULAR_SEGMENTS: usize = 28;

    pub fn with_bins(radial_bins: usize) -> Self {
        Self {
            radial_bins,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_bins < 2 {
            return Err(Error::param(format!("radial_bins = {} must be at least 2", self.radial_bins)));
        }
        if !(self.rho_max > 0.0 && self.rho_max.is_finite()) {
            return Err(Error::param("rho_max must be positive"));
        }
        Ok(())
    }

    /// `(x, y)` sample location for segment `s`, bin `r`.
    pub fn sample_point(&self, s: usize, r: usize) -> (f64, f64) {
        let theta = TAU * s as f64 / Self::ANGULAR_SEGMENTS as f64;
        let rho = r as f64 * self.rho_max / (self.radial_bins - 1) as f64;
        (self.center.0 + rho * theta.cos(), self.center.1 + rho * theta.sin())
    }
}

/// `28 × R` polar resampling; row = angular segment, column = radial bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    values: Matrix,
}

impl PolarImage {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn radial_bins(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, segment: usize, bin: usize) -> f64 {
        self.values[(segment, bin)]
    }
}

pub fn to_polar(img: &GrayImage, geom: &PolarGeometry) -> Result<PolarImage> {
    geom.validate()?;
    let s_count = PolarGeometry::ANGULAR_SEGMENTS;
    let values = Matrix::from_fn(s_count, geom.radial_bins, |s, r| {
        let (x, y) = geom.sample_point(s, r);
        img.bilinear(x, y)
    });
    Ok(PolarImage { values })
}
