//! Dense real third-order tensors.
//!
//! Entries are stored frontal-slice-major and column-major within a slice:
//! entry `(i, j, k)` lives at `k * n1 * n2 + j * n1 + i`. The same order is
//! used for `vec(·)` by the measurement operators, so the layout is part of
//! the public contract.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TubalError};

/// Shape `(n1, n2, n3)` of a third-order tensor.
pub type Dims = (usize, usize, usize);

/// A real tensor in `R^{n1 x n2 x n3}` with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor", into = "RawTensor")]
pub struct DenseTensor3 {
    dims: Dims,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for DenseTensor3 {
    type Error = TubalError;

    fn try_from(raw: RawTensor) -> Result<Self> {
        let [n1, n2, n3] = raw.dims;
        DenseTensor3::new((n1, n2, n3), raw.data)
    }
}

impl From<DenseTensor3> for RawTensor {
    fn from(t: DenseTensor3) -> Self {
        let (n1, n2, n3) = t.dims;
        RawTensor {
            dims: [n1, n2, n3],
            data: t.data,
        }
    }
}

pub(crate) fn check_dims(dims: Dims) -> Result<()> {
    let (n1, n2, n3) = dims;
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(TubalError::InvalidDims(format!(
            "all dimensions must be >= 1, got {n1}x{n2}x{n3}"
        )));
    }
    Ok(())
}

impl DenseTensor3 {
    /// Builds a tensor from data in storage order.
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let len = dims.0 * dims.1 * dims.2;
        if data.len() != len {
            return Err(TubalError::InvalidDims(format!(
                "expected {len} entries for {}x{}x{}, got {}",
                dims.0,
                dims.1,
                dims.2,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TubalError::NonFinite(format!("entry {pos} is {}", data[pos])));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        })
    }

    /// Builds a tensor by evaluating `f(i, j, k)` for every entry.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        check_dims(dims)?;
        let (n1, n2, n3) = dims;
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    /// Stacks frontal slices (all of the same shape) into a tensor.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| TubalError::InvalidDims("no frontal slices".into()))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(TubalError::DimMismatch(format!(
                    "slice {k} has shape {:?}, expected {:?}",
                    s.shape(),
                    (n1, n2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::new((n1, n2, slices.len()), data)
    }

    /// Wraps data already known to be finite and correctly sized.
    pub(crate) fn from_parts_unchecked(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.0 * dims.1 * dims.2);
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.dims.0
    }

    pub fn n2(&self) -> usize {
        self.dims.1
    }

    pub fn n3(&self) -> usize {
        self.dims.2
    }

    /// Number of entries, `n1 * n2 * n3`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entries in storage order; this is also `vec(self)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, i: usize, j: usize, k: usize) -> usize {
        let (n1, n2, _) = self.dims;
        k * n1 * n2 + j * n1 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index_of(i, j, k)]
    }

    /// Frontal slice `X(:, :, k)` as an `n1 x n2` matrix.
    pub fn frontal_slice(&self, k: usize) -> DMatrix<f64> {
        let (n1, n2, _) = self.dims;
        let start = k * n1 * n2;
        DMatrix::from_column_slice(n1, n2, &self.data[start..start + n1 * n2])
    }

    pub fn frontal_slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.n3()).map(|k| self.frontal_slice(k)).collect()
    }

    /// Tube `X(i, j, :)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n3()).map(|k| self.get(i, j, k)).collect()
    }

    /// Lateral slice `X(:, j, :)` as an `n1 x 1 x n3` tensor.
    pub fn lateral_slice(&self, j: usize) -> DenseTensor3 {
        let (n1, _, n3) = self.dims;
        let mut data = Vec::with_capacity(n1 * n3);
        for k in 0..n3 {
            for i in 0..n1 {
                data.push(self.get(i, j, k));
            }
        }
        Self::from_parts_unchecked((n1, 1, n3), data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_parts_unchecked(self.dims, self.data.iter().map(|v| alpha * v).collect())
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(TubalError::DimMismatch(format!(
                "{op}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts_unchecked(self.dims, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, "axpy", |a, b| a + alpha * b)
    }

    /// Frobenius inner product `<self, other>`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(TubalError::DimMismatch(format!(
                "inner: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `sqrt(sum |x_ijk|^2)`.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise maximum absolute value.
    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Frobenius norm of a tensor.
pub fn fro_norm(x: &DenseTensor3) -> f64 {
    x.fro_norm()
}
