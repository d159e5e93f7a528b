//! `TFM1` checkpoints: `u8 kind`, six `u32` sizes (input_dim, seq_len,
//! layers, heads, ffn_hidden, outputs), `u8 positional` (0 = sinusoidal),
//! `u8 activation`, then every tensor in layout order as little-endian f64.

use std::path::Path;

use super::params::tensor_layout;
use super::spec::{Activation, Arch, ArchKind};
use super::TransformerParams;
use crate::binio::{put_f64s, put_u32, read_file, to_u32, write_file, ByteReader};
use crate::error::{ParseError, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TFM1";

const SINUSOIDAL: u8 = 0;

impl TransformerParams {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let a = self.arch();
        let mut out = Vec::with_capacity(32 + self.param_count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(match a.kind {
            ArchKind::Encoder => 0,
            ArchKind::Decoder => 1,
        });
        for (name, v) in [
            ("input_dim", a.input_dim),
            ("seq_len", a.seq_len),
            ("layers", a.layers),
            ("heads", a.heads),
            ("ffn_hidden", a.ffn_hidden),
            ("outputs", a.outputs),
        ] {
            put_u32(&mut out, to_u32(name, v)?);
        }
        out.push(SINUSOIDAL);
        out.push(a.activation.code());
        for t in self.tensors() {
            put_f64s(&mut out, t.as_slice());
        }
        Ok(out)
    }

    /// `path` is only used to label errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        r.magic(CHECKPOINT_MAGIC)?;
        let bad = |r: &ByteReader, field, value: u64, offset| r.fail(ParseError::BadHeader { field, value, offset });
        let kind = match r.u8()? {
            0 => ArchKind::Encoder,
            1 => ArchKind::Decoder,
            v => return Err(bad(&r, "kind", v as u64, 4)),
        };
        let mut sizes = [0usize; 6];
        for s in &mut sizes {
            *s = r.u32_le()? as usize;
        }
        let positional = r.u8()?;
        if positional != SINUSOIDAL {
            return Err(bad(&r, "positional", positional as u64, 29));
        }
        let code = r.u8()?;
        let activation = Activation::from_code(code).ok_or_else(|| bad(&r, "activation", code as u64, 30))?;
        let [input_dim, seq_len, layers, heads, ffn_hidden, outputs] = sizes;
        let arch = Arch {
            kind,
            input_dim,
            seq_len,
            layers,
            heads,
            ffn_hidden,
            outputs,
            activation,
        };
        if arch.validate().is_err() {
            return Err(r.fail(ParseError::Other(format!("inconsistent model sizes {arch:?}"))));
        }
        let layout = tensor_layout(&arch);
        let total: u64 = layout.iter().map(|(_, (rr, c))| (rr * c) as u64).sum();
        r.require(total * 8)?;
        let mut tensors = Vec::with_capacity(layout.len());
        for (_, (rows, cols)) in layout {
            tensors.push(Matrix::new(rows, cols, r.f64_vec(rows * cols)?)?);
        }
        r.finish()?;
        TransformerParams::from_tensors(arch, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}
