//! MATX and SEQX binary formats.
//!
//! ```text
//! MATX: "MATX" | version u32 = 1 | rows u64 | cols u64 | rows*cols f64
//! SEQX: "SEQX" | version u32 = 1 | sentences u64 | cols u64
//!       | per sentence: tokens u64 | tokens*cols f64
//! ```
//!
//! Integers and floats are little-endian; floats are row-major.

use std::fs;
use std::path::Path;

use super::{Matrix, SequenceSet};
use crate::error::{Error, Result};

pub const MATX_MAGIC: &[u8; 4] = b"MATX";
pub const SEQX_MAGIC: &[u8; 4] = b"SEQX";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>> {
    m.check_finite()?;
    let mut buf = Vec::with_capacity(24 + 8 * m.data().len());
    buf.extend_from_slice(MATX_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    push_floats(&mut buf, m.data());
    Ok(buf)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let mut cur = Cursor::new(bytes);
    cur.magic(MATX_MAGIC)?;
    let rows = cur.len_u64()?;
    let cols = cur.len_u64()?;
    let data = cur.floats(rows, cols, 0)?;
    cur.finish()?;
    Matrix::new(rows, cols, data)
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_matrix(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matx(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

pub fn encode_sequences(set: &SequenceSet) -> Result<Vec<u8>> {
    let total: usize = set.sentences().iter().map(|m| m.data().len()).sum();
    let mut buf = Vec::with_capacity(28 + 8 * set.len() + 8 * total);
    buf.extend_from_slice(SEQX_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.cols() as u64).to_le_bytes());
    for m in set.sentences() {
        m.check_finite()?;
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        push_floats(&mut buf, m.data());
    }
    Ok(buf)
}

pub fn decode_sequences(bytes: &[u8]) -> Result<SequenceSet> {
    let mut cur = Cursor::new(bytes);
    cur.magic(SEQX_MAGIC)?;
    let n = cur.len_u64()?;
    let cols = cur.len_u64()?;
    let mut sentences = Vec::with_capacity(n.min(1 << 20));
    let mut row_offset = 0;
    for _ in 0..n {
        let tokens = cur.len_u64()?;
        let data = cur.floats(tokens, cols, row_offset)?;
        row_offset += tokens;
        sentences.push(Matrix::new(tokens, cols, data)?);
    }
    cur.finish()?;
    SequenceSet::new(cols, sentences)
}

pub fn write_sequences(set: &SequenceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sequences(set)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sequences(path: impl AsRef<Path>) -> Result<SequenceSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sequences(&bytes)
}

fn push_floats(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::TruncatedPayload {
                expected: (self.pos as u64).saturating_add(n as u64),
                found: self.bytes.len() as u64,
            }),
        }
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4).map_err(|_| Error::BadMagic {
            expected: String::from_utf8_lossy(expected).into_owned(),
            found: String::from_utf8_lossy(self.bytes).into_owned(),
        })?;
        if found != expected {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let version = u32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        Ok(())
    }

    fn len_u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} out of range")))
    }

    /// `rows * cols` floats; non-finite values are reported at
    /// `row_offset + row`.
    fn floats(&mut self, rows: usize, cols: usize, row_offset: usize) -> Result<Vec<f64>> {
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Format(format!("{rows}x{cols} overflows")))?;
        let raw = self.take(count)?;
        let mut out = Vec::with_capacity(rows * cols);
        for (i, chunk) in raw.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: row_offset + i / cols,
                    col: i % cols,
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
