//! Binary container for tensors, vectors and measurement maps, plus JSON
//! helpers.
//!
//! Layout, all integers `u64` little-endian and all values `f64`
//! little-endian:
//!
//! ```text
//! tensor:  "TUBTNS01" n1 n2 n3   data (storage order)
//! vector:  "TUBVEC01" len        data
//! map:     "TUBMAP01" m n1 n2 n3 data (row-major m x n1 n2 n3)
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, TubalError};
use crate::measurement::GaussianLinearMap;
use crate::tensor::DenseTensor3;

pub const TENSOR_MAGIC: &[u8; 8] = b"TUBTNS01";
pub const VECTOR_MAGIC: &[u8; 8] = b"TUBVEC01";
pub const MAP_MAGIC: &[u8; 8] = b"TUBMAP01";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if buf.len() < 8 || &buf[..8] != magic {
            return Err(TubalError::Format(format!(
                "expected magic {}",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(Self { buf, pos: 8 })
    }

    fn word(&mut self) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| TubalError::Format("truncated container".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("8-byte slice"))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.word()?))
            .map_err(|_| TubalError::Format("dimension does not fit in usize".into()))
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let expected = count
            .checked_mul(8)
            .ok_or_else(|| TubalError::Format("payload size overflows".into()))?;
        if self.buf.len() - self.pos != expected {
            return Err(TubalError::Format(format!(
                "payload is {} bytes, expected {expected}",
                self.buf.len() - self.pos
            )));
        }
        (0..count).map(|_| Ok(f64::from_le_bytes(self.word()?))).collect()
    }
}

fn header(magic: &[u8; 8], dims: &[usize], values: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (1 + dims.len() + values));
    out.extend_from_slice(magic);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out
}

fn push_values(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_tensor(x: &DenseTensor3) -> Vec<u8> {
    let (n1, n2, n3) = x.dims();
    let mut out = header(TENSOR_MAGIC, &[n1, n2, n3], x.len());
    push_values(&mut out, x.as_slice().iter().copied());
    out
}

pub fn decode_tensor(buf: &[u8]) -> Result<DenseTensor3> {
    let mut r = Reader::new(buf, TENSOR_MAGIC)?;
    let dims = (r.usize()?, r.usize()?, r.usize()?);
    let count = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| TubalError::Format("tensor size overflows".into()))?;
    DenseTensor3::new(dims, r.values(count)?)
}

pub fn encode_vector(v: &DVector<f64>) -> Vec<u8> {
    let mut out = header(VECTOR_MAGIC, &[v.len()], v.len());
    push_values(&mut out, v.iter().copied());
    out
}

pub fn decode_vector(buf: &[u8]) -> Result<DVector<f64>> {
    let mut r = Reader::new(buf, VECTOR_MAGIC)?;
    let len = r.usize()?;
    let data = r.values(len)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(TubalError::NonFinite("vector payload".into()));
    }
    Ok(DVector::from_vec(data))
}

pub fn encode_map(map: &GaussianLinearMap) -> Vec<u8> {
    let (n1, n2, n3) = map.dims();
    let mat = map.matrix();
    let mut out = header(MAP_MAGIC, &[map.m(), n1, n2, n3], mat.len());
    push_values(&mut out, mat.transpose().iter().copied());
    out
}

/// Decoded maps carry no seed provenance.
pub fn decode_map(buf: &[u8]) -> Result<GaussianLinearMap> {
    let mut r = Reader::new(buf, MAP_MAGIC)?;
    let m = r.usize()?;
    let dims = (r.usize()?, r.usize()?, r.usize()?);
    let n = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| TubalError::Format("map size overflows".into()))?;
    let count = m
        .checked_mul(n)
        .ok_or_else(|| TubalError::Format("map size overflows".into()))?;
    let data = r.values(count)?;
    GaussianLinearMap::from_matrix(dims, DMatrix::from_row_slice(m, n, &data))
}

pub fn write_tensor(path: &Path, x: &DenseTensor3) -> Result<()> {
    Ok(std::fs::write(path, encode_tensor(x))?)
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor3> {
    decode_tensor(&std::fs::read(path)?)
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    Ok(std::fs::write(path, encode_vector(v))?)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    decode_vector(&std::fs::read(path)?)
}

pub fn write_map(path: &Path, map: &GaussianLinearMap) -> Result<()> {
    Ok(std::fs::write(path, encode_map(map))?)
}

pub fn read_map(path: &Path) -> Result<GaussianLinearMap> {
    decode_map(&std::fs::read(path)?)
}

/// Reads a tensor stored either in the binary container or as JSON
/// (`{"dims": [n1, n2, n3], "data": [...]}`).
pub fn read_tensor_any(path: &Path) -> Result<DenseTensor3> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(TENSOR_MAGIC) {
        decode_tensor(&bytes)
    } else {
        Ok(serde_json::from_slice(&bytes)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(std::fs::write(path, s)?)
}
