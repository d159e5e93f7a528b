//! `PCB1` bank files: little-endian header `u32 S, u32 D, u32 k, u8 axis`,
//! then for each model μ (D f64), W (k×D f64, row-major) and λ (k f64).

use std::path::Path;

use super::{PcaBank, PcaModel, SegmentAxis};
use crate::binio::{put_f64s, put_u32, read_file, to_u32, write_file, ByteReader};
use crate::error::{ParseError, Result};
use crate::numerics::Matrix;

pub const BANK_MAGIC: &[u8; 4] = b"PCB1";

impl PcaBank {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (s, d, k) = (self.segments(), self.dim(), self.k());
        let mut out = Vec::with_capacity(17 + s * (d + k * d + k) * 8);
        out.extend_from_slice(BANK_MAGIC);
        put_u32(&mut out, to_u32("S", s)?);
        put_u32(&mut out, to_u32("D", d)?);
        put_u32(&mut out, to_u32("k", k)?);
        out.push(self.axis().code());
        for m in self.models() {
            put_f64s(&mut out, m.mean());
            put_f64s(&mut out, m.components().as_slice());
            put_f64s(&mut out, m.eigenvalues());
        }
        Ok(out)
    }

    /// `path` is only used to label errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<PcaBank> {
        let mut r = ByteReader::new(bytes, path);
        r.magic(BANK_MAGIC)?;
        let s = r.u32_le()? as usize;
        let d = r.u32_le()? as usize;
        let k_off = r.offset();
        let k = r.u32_le()? as usize;
        let axis_off = r.offset();
        let code = r.u8()?;
        if s == 0 {
            return Err(r.fail(ParseError::BadHeader {
                field: "S",
                value: 0,
                offset: 4,
            }));
        }
        if k == 0 || k > d {
            return Err(r.fail(ParseError::BadHeader {
                field: "k",
                value: k as u64,
                offset: k_off,
            }));
        }
        let axis = SegmentAxis::from_code(code).ok_or_else(|| {
            r.fail(ParseError::BadHeader {
                field: "axis",
                value: code as u64,
                offset: axis_off,
            })
        })?;
        r.require(s as u64 * (d + k * d + k) as u64 * 8)?;
        let mut models = Vec::with_capacity(s);
        for _ in 0..s {
            let mean = r.f64_vec(d)?;
            let w = Matrix::from_vec(k, d, r.f64_vec(k * d)?);
            let lambda = r.f64_vec(k)?;
            models.push(PcaModel::from_parts(mean, w, lambda, None)?);
        }
        r.finish()?;
        PcaBank::new(models, axis)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<PcaBank> {
        PcaBank::from_bytes(&read_file(path)?, path)
    }
}
