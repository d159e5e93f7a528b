use super::{to_polar, GrayImage, PolarGeometry};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pca::{bank_fit, bank_transform, PcaBank, SegmentAxis, Tensor3};

/// Polar resamplings stacked as `N × 28 × R`.
pub fn polar_tensor(images: &[GrayImage], geom: &PolarGeometry) -> Result<Tensor3> {
    geom.validate()?;
    let s = PolarGeometry::ANGULAR_SEGMENTS;
    let r = geom.radial_bins;
    let mut data = Vec::with_capacity(images.len() * s * r);
    for img in images {
        data.extend_from_slice(to_polar(img, geom)?.values().as_slice());
    }
    Tensor3::new(images.len(), s, r, data)
}

/// Fits the per-segment bank on the polar training tensor.
pub fn fit_polar_bank(images: &[GrayImage], geom: &PolarGeometry, k: usize) -> Result<PcaBank> {
    bank_fit(&polar_tensor(images, geom)?, k, SegmentAxis::AngularSegment)
}

/// Concatenated segment projections, `N × (28·k)`, segment-major.
pub fn extract_polar_pca_features(images: &[GrayImage], bank: &PcaBank, geom: &PolarGeometry) -> Result<Matrix> {
    if bank.segments() != PolarGeometry::ANGULAR_SEGMENTS || bank.dim() != geom.radial_bins {
        return Err(Error::shape(format!(
            "bank is {} segments x {} bins, images resample to {} x {}",
            bank.segments(),
            bank.dim(),
            PolarGeometry::ANGULAR_SEGMENTS,
            geom.radial_bins
        )));
    }
    Ok(bank_transform(bank, &polar_tensor(images, geom)?)?.flatten_samples())
}
