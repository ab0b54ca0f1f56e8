//! Linear measurement maps `y = M vec(X) + w` and the SNR metric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TubalError};
use crate::rng::{standard_normals, stream_rng, Stream};
use crate::tensor::{check_dims, DenseTensor3, Dims};

/// Entry variance of a Gaussian measurement matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// `N(0, 1)` entries.
    Unit,
    /// `N(0, 1/m)` entries, so that `E ||M x||^2 = ||x||^2`.
    OneOverM,
}

/// How a map's matrix was produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapOrigin {
    Gaussian { seed: u64, variance_mode: VarianceMode },
    Explicit,
}

/// The measurement operator, stored as an `m x (n1 n2 n3)` matrix acting on
/// `vec(X)` in tensor storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLinearMap {
    dims: Dims,
    matrix: DMatrix<f64>,
    origin: MapOrigin,
}

impl GaussianLinearMap {
    /// Draws an `m x N` Gaussian matrix, row by row, from the map stream of `seed`.
    pub fn gaussian(m: usize, dims: Dims, seed: u64, variance_mode: VarianceMode) -> Result<Self> {
        check_dims(dims)?;
        if m == 0 {
            return Err(TubalError::InvalidDims("measurement count must be >= 1".into()));
        }
        let n = dims.0 * dims.1 * dims.2;
        let mut rng = stream_rng(seed, Stream::Map);
        let mut entries = standard_normals(&mut rng, m * n);
        if variance_mode == VarianceMode::OneOverM {
            let s = 1.0 / (m as f64).sqrt();
            entries.iter_mut().for_each(|e| *e *= s);
        }
        Ok(Self {
            dims,
            matrix: DMatrix::from_row_slice(m, n, &entries),
            origin: MapOrigin::Gaussian {
                seed,
                variance_mode,
            },
        })
    }

    /// Wraps an explicit matrix, e.g. the identity for isometry checks.
    pub fn from_matrix(dims: Dims, matrix: DMatrix<f64>) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.0 * dims.1 * dims.2;
        if matrix.ncols() != n || matrix.nrows() == 0 {
            return Err(TubalError::DimMismatch(format!(
                "matrix is {:?}, expected m x {n}",
                matrix.shape()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(TubalError::NonFinite("measurement matrix".into()));
        }
        Ok(Self {
            dims,
            matrix,
            origin: MapOrigin::Explicit,
        })
    }

    /// `scale * I` on the full vectorized space.
    pub fn scaled_identity(dims: Dims, scale: f64) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.0 * dims.1 * dims.2;
        Self::from_matrix(dims, DMatrix::identity(n, n) * scale)
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Length of `vec(X)`.
    pub fn ambient_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn origin(&self) -> MapOrigin {
        self.origin
    }

    fn check_tensor(&self, x: &DenseTensor3) -> Result<()> {
        if x.dims() != self.dims {
            return Err(TubalError::DimMismatch(format!(
                "map expects {:?}, tensor is {:?}",
                self.dims,
                x.dims()
            )));
        }
        Ok(())
    }

    /// `M vec(x)`.
    pub fn apply(&self, x: &DenseTensor3) -> Result<DVector<f64>> {
        self.check_tensor(x)?;
        Ok(&self.matrix * DVector::from_column_slice(x.as_slice()))
    }

    /// `reshape(M^T v)`.
    pub fn adjoint_apply(&self, v: &DVector<f64>) -> Result<DenseTensor3> {
        if v.len() != self.m() {
            return Err(TubalError::DimMismatch(format!(
                "adjoint expects {} measurements, got {}",
                self.m(),
                v.len()
            )));
        }
        let out = self.matrix.tr_mul(v);
        DenseTensor3::new(self.dims, out.as_slice().to_vec())
    }
}

/// Free-function form of [`GaussianLinearMap::gaussian`].
pub fn gaussian_map(m: usize, dims: Dims, seed: u64, variance_mode: VarianceMode) -> Result<GaussianLinearMap> {
    GaussianLinearMap::gaussian(m, dims, seed, variance_mode)
}

/// Measurements with additive Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisySample {
    pub y: DVector<f64>,
    pub sigma: f64,
    pub noise_seed: u64,
    /// Realized `||w||_2`.
    pub noise_norm: f64,
}

/// `y + w` with `w ~ N(0, sigma^2 I)` drawn from the noise stream of
/// `noise_seed`. The draw is `sigma * g` for a fixed standard normal `g`, so
/// equal seeds give proportional noise across noise levels.
pub fn add_noise(y: &DVector<f64>, sigma: f64, noise_seed: u64) -> Result<NoisySample> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(TubalError::InvalidArgument(format!(
            "noise level must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(NoisySample {
            y: y.clone(),
            sigma,
            noise_seed,
            noise_norm: 0.0,
        });
    }
    let g = standard_normals(&mut stream_rng(noise_seed, Stream::Noise), y.len());
    let w = DVector::from_vec(g) * sigma;
    Ok(NoisySample {
        y: y + &w,
        sigma,
        noise_seed,
        noise_norm: w.norm(),
    })
}

/// Error norms below this are treated as exact recovery.
pub const SNR_EXACT_FLOOR: f64 = 1e-300;

/// `20 log10(||x_true||_F / ||x_true - x_hat||_F)`; `+inf` for exact recovery.
pub fn snr_db(x_true: &DenseTensor3, x_hat: &DenseTensor3) -> Result<f64> {
    let signal = x_true.fro_norm();
    if signal == 0.0 {
        return Err(TubalError::InvalidArgument("SNR of a zero ground truth".into()));
    }
    let err = x_true.sub(x_hat)?.fro_norm();
    if err < SNR_EXACT_FLOOR {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (signal / err).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gaussian_map(7, (2, 3, 2), 42, VarianceMode::OneOverM).unwrap();
        let b = gaussian_map(7, (2, 3, 2), 42, VarianceMode::OneOverM).unwrap();
        assert_eq!(a, b);
        let c = gaussian_map(7, (2, 3, 2), 43, VarianceMode::OneOverM).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn invalid_construction() {
        assert!(gaussian_map(0, (2, 2, 2), 1, VarianceMode::Unit).is_err());
        assert!(gaussian_map(3, (0, 2, 2), 1, VarianceMode::Unit).is_err());
        assert!(GaussianLinearMap::from_matrix((1, 1, 2), DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn apply_zero_and_identity() {
        let map = gaussian_map(5, (2, 2, 2), 1, VarianceMode::Unit).unwrap();
        let z = DenseTensor3::zeros((2, 2, 2)).unwrap();
        assert_eq!(map.apply(&z).unwrap().norm(), 0.0);
        assert!(map.apply(&DenseTensor3::zeros((2, 2, 1)).unwrap()).is_err());

        let id = GaussianLinearMap::scaled_identity((2, 2, 2), 1.0).unwrap();
        let x = DenseTensor3::from_fn((2, 2, 2), |i, j, k| (i + 2 * j + 4 * k) as f64).unwrap();
        assert_eq!(id.apply(&x).unwrap().as_slice(), x.as_slice());
        let v = DVector::from_fn(8, |i, _| i as f64);
        assert_eq!(id.adjoint_apply(&v).unwrap().as_slice(), v.as_slice());
        assert_eq!(map.adjoint_apply(&DVector::zeros(5)).unwrap().fro_norm(), 0.0);
        assert!(map.adjoint_apply(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn noise_edge_cases() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let s = add_noise(&y, 0.0, 5).unwrap();
        assert_eq!(s.y, y);
        assert_eq!(s.noise_norm, 0.0);
        assert_eq!(add_noise(&y, 0.1, 5).unwrap(), add_noise(&y, 0.1, 5).unwrap());
        assert!(add_noise(&y, -1.0, 5).is_err());
        assert!(add_noise(&y, f64::NAN, 5).is_err());
    }

    #[test]
    fn snr_definition() {
        let x = DenseTensor3::from_fn((2, 2, 1), |i, j, _| (1 + i + j) as f64).unwrap();
        let zero = DenseTensor3::zeros((2, 2, 1)).unwrap();
        assert!(snr_db(&x, &zero).unwrap().abs() < 1e-12);
        assert_eq!(snr_db(&x, &x).unwrap(), f64::INFINITY);
        let e = x.scale(0.9);
        assert!((snr_db(&x, &e).unwrap() - 20.0).abs() < 1e-12);
        assert!(snr_db(&zero, &x).is_err());
    }
}
