//! IDX image/label files as distributed for MNIST.

use std::path::Path;

use super::GrayImage;
use crate::binio::{read_file, ByteReader};
use crate::error::{Error, ParseError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<(Vec<GrayImage>, Vec<u8>)> {
    let images = parse_images(&read_file(images_path)?, images_path)?;
    let labels = parse_labels(&read_file(labels_path)?, labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::parse(
            labels_path,
            ParseError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            },
        ));
    }
    Ok((images, labels))
}

fn magic(r: &mut ByteReader, expected: u32) -> Result<()> {
    r.magic(&expected.to_be_bytes())
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<Vec<GrayImage>> {
    let mut r = ByteReader::new(bytes, path);
    magic(&mut r, IMAGES_MAGIC)?;
    let n = r.u32_be()? as usize;
    for (field, offset) in [("rows", 8), ("cols", 12)] {
        let v = r.u32_be()?;
        if v as usize != GrayImage::SIDE {
            return Err(r.fail(ParseError::BadHeader {
                field,
                value: v as u64,
                offset,
            }));
        }
    }
    r.require((n * GrayImage::PIXELS) as u64)?;
    let images = (0..n)
        .map(|_| {
            let raw = r.take(GrayImage::PIXELS).expect("length checked above");
            GrayImage::from_bytes(raw)
        })
        .collect();
    r.finish()?;
    Ok(images)
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(bytes, path);
    magic(&mut r, LABELS_MAGIC)?;
    let n = r.u32_be()? as usize;
    let start = r.offset();
    let labels = r.take(n)?.to_vec();
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(r.fail(ParseError::BadLabel {
            label: labels[i] as u32,
            offset: start + i as u64,
        }));
    }
    r.finish()?;
    Ok(labels)
}

/// Serializes images and labels back to IDX (used for synthetic fixtures).
pub fn encode_idx(images: &[GrayImage], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len() * GrayImage::PIXELS);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(GrayImage::SIDE as u32).to_be_bytes());
    img.extend_from_slice(&(GrayImage::SIDE as u32).to_be_bytes());
    for im in images {
        img.extend(im.pixels().iter().map(|&p| (p * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(r: Result<impl std::fmt::Debug>) -> ParseError {
        match r {
            Err(Error::Parse { kind, .. }) => kind,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_pair_round_trips() {
        let (img, lab) = encode_idx(&[GrayImage::zeros(), GrayImage::zeros()], &[3, 7]);
        let p = Path::new("mem");
        let images = parse_images(&img, p).unwrap();
        assert_eq!(images.len(), 2);
        assert!(images.iter().all(|im| im.pixels().iter().all(|&v| v == 0.0)));
        assert_eq!(parse_labels(&lab, p).unwrap(), vec![3, 7]);
    }

    #[test]
    fn distinct_errors() {
        let p = Path::new("mem");
        let (img, lab) = encode_idx(&[GrayImage::zeros()], &[1]);
        assert!(matches!(
            kind(parse_images(&img[..10], p)),
            ParseError::Truncated { expected: 12, actual: 10 }
        ));
        assert!(matches!(
            kind(parse_images(&img[..100], p)),
            ParseError::Truncated { expected: 800, actual: 100 }
        ));
        assert!(matches!(kind(parse_images(&lab, p)), ParseError::BadMagic { .. }));
        assert!(matches!(kind(parse_labels(&img, p)), ParseError::BadMagic { .. }));
        let mut bad = lab.clone();
        bad[8] = 10;
        assert!(matches!(kind(parse_labels(&bad, p)), ParseError::BadLabel { label: 10, offset: 8 }));
        let mut cols = img.clone();
        cols[15] = 29;
        assert!(matches!(kind(parse_images(&cols, p)), ParseError::BadHeader { field: "cols", .. }));
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = encode_idx(&[GrayImage::zeros(), GrayImage::zeros()], &[0, 0]);
        let (_, lab) = encode_idx(&[], &[4]);
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        assert!(matches!(
            kind(load_mnist(&ip, &lp)),
            ParseError::CountMismatch { images: 2, labels: 1 }
        ));
        let missing = dir.path().join("nope");
        match load_mnist(&missing, &lp) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }
}
