//! Cursor over an in-memory file image, shared by the binary formats.

use std::path::{Path, PathBuf};

use crate::error::{Error, ParseError, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8], path: &Path) -> Self {
        Self {
            buf,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn fail(&self, kind: ParseError) -> Error {
        Error::parse(&self.path, kind)
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.fail(ParseError::Truncated {
                expected: (self.pos + n) as u64,
                actual: self.buf.len() as u64,
            }));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Fails with `Truncated` unless `n` more bytes are available, without consuming.
    pub(crate) fn require(&self, n: u64) -> Result<()> {
        let have = self.remaining() as u64;
        if have < n {
            return Err(self.fail(ParseError::Truncated {
                expected: self.pos as u64 + n,
                actual: self.buf.len() as u64,
            }));
        }
        Ok(())
    }

    pub(crate) fn magic(&mut self, expected: &[u8]) -> Result<()> {
        let n = expected.len().min(self.remaining());
        let found = &self.buf[self.pos..self.pos + n];
        if found != expected {
            return Err(self.fail(ParseError::BadMagic {
                expected: expected.to_vec(),
                found: found.to_vec(),
            }));
        }
        self.pos += n;
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// `n` finite little-endian f64 values.
    pub(crate) fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let start = self.offset();
        let raw = self.take(n * 8)?;
        raw.chunks_exact(8)
            .enumerate()
            .map(|(i, c)| {
                let v = f64::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.fail(ParseError::NonFinite {
                        offset: start + 8 * i as u64,
                    }))
                }
            })
            .collect()
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() > 0 {
            return Err(self.fail(ParseError::TrailingBytes {
                offset: self.offset(),
                extra: self.remaining() as u64,
            }));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn to_u32(field: &'static str, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::param(format!("{field} = {v} does not fit in u32")))
}
