//! Mode-3 discrete Fourier transform and the Fourier-domain representation.

use std::cell::RefCell;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, TubalError};
use crate::tensor::{DenseTensor3, Dims};

/// Relative imaginary residual above which an inverse transform is rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Fourier-domain tensor: slice `k` holds the `k`-th DFT coefficient of every tube.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTensor3 {
    dims: Dims,
    slices: Vec<DMatrix<Complex64>>,
}

impl FourierTensor3 {
    pub fn new(slices: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| TubalError::InvalidDims("no Fourier slices".into()))?;
        let (n1, n2) = first.shape();
        if n1 == 0 || n2 == 0 {
            return Err(TubalError::InvalidDims("empty Fourier slice".into()));
        }
        if slices.iter().any(|s| s.shape() != (n1, n2)) {
            return Err(TubalError::DimMismatch("Fourier slices differ in shape".into()));
        }
        Ok(Self {
            dims: (n1, n2, slices.len()),
            slices,
        })
    }

    /// Builds a Fourier tensor from the first `n3 / 2 + 1` slices, filling the
    /// rest by conjugate symmetry so that the inverse transform is real.
    pub fn from_half_spectrum(half: Vec<DMatrix<Complex64>>, n3: usize) -> Result<Self> {
        if half.len() != n3 / 2 + 1 {
            return Err(TubalError::DimMismatch(format!(
                "half spectrum for n3={n3} needs {} slices, got {}",
                n3 / 2 + 1,
                half.len()
            )));
        }
        let mut slices = half;
        for k in slices.len()..n3 {
            let mirror = slices[n3 - k].map(|z| z.conj());
            slices.push(mirror);
        }
        Self::new(slices)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn slices(&self) -> &[DMatrix<Complex64>] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k]
    }

    pub fn into_slices(self) -> Vec<DMatrix<Complex64>> {
        self.slices
    }

    /// Largest entrywise deviation from `slice k == conj(slice n3-k)`,
    /// relative to the tensor's Frobenius norm.
    pub fn symmetry_residual(&self) -> f64 {
        let n3 = self.dims.2;
        let norm = self
            .slices
            .iter()
            .map(|s| s.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k in 0..n3 {
            let mirror = &self.slices[(n3 - k) % n3];
            for (a, b) in self.slices[k].iter().zip(mirror.iter()) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst / norm
    }

    /// The block-diagonal matrix `bdiag(X̄)` of size `n1*n3 x n2*n3`.
    pub fn bdiag(&self) -> DMatrix<Complex64> {
        let (n1, n2, n3) = self.dims;
        let mut out = DMatrix::zeros(n1 * n3, n2 * n3);
        for (k, s) in self.slices.iter().enumerate() {
            out.view_mut((k * n1, k * n2), (n1, n2)).copy_from(s);
        }
        out
    }

    /// Frobenius norm of `bdiag(X̄)`.
    pub fn fro_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

fn transform_tubes(dims: Dims, buf: &mut [Complex64], inverse: bool) {
    let n3 = dims.2;
    if n3 == 1 {
        return;
    }
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n3)
        } else {
            p.plan_fft_forward(n3)
        }
    });
    // buffer holds tubes contiguously, so one call transforms all of them
    fft.process(buf);
}

/// `X̄ = fft(X, [], 3)`.
pub fn dft_mode3(x: &DenseTensor3) -> FourierTensor3 {
    let (n1, n2, n3) = x.dims();
    let plane = n1 * n2;
    let data = x.as_slice();
    let mut buf = vec![Complex64::new(0.0, 0.0); plane * n3];
    for p in 0..plane {
        for k in 0..n3 {
            buf[p * n3 + k] = Complex64::new(data[k * plane + p], 0.0);
        }
    }
    transform_tubes(x.dims(), &mut buf, false);
    let slices = (0..n3)
        .map(|k| DMatrix::from_fn(n1, n2, |i, j| buf[(j * n1 + i) * n3 + k]))
        .collect();
    FourierTensor3 {
        dims: x.dims(),
        slices,
    }
}

/// `X = ifft(X̄, [], 3)`; fails when the result is not real to within
/// [`SYMMETRY_TOL`] relative.
pub fn idft_mode3(xf: &FourierTensor3) -> Result<DenseTensor3> {
    let (n1, n2, n3) = xf.dims;
    let plane = n1 * n2;
    let mut buf = vec![Complex64::new(0.0, 0.0); plane * n3];
    for (k, s) in xf.slices.iter().enumerate() {
        for j in 0..n2 {
            for i in 0..n1 {
                buf[(j * n1 + i) * n3 + k] = s[(i, j)];
            }
        }
    }
    transform_tubes(xf.dims, &mut buf, true);
    let scale = 1.0 / n3 as f64;
    let mut re_sq = 0.0;
    let mut im_sq = 0.0;
    let mut data = vec![0.0; plane * n3];
    for p in 0..plane {
        for k in 0..n3 {
            let z = buf[p * n3 + k] * scale;
            re_sq += z.re * z.re;
            im_sq += z.im * z.im;
            data[k * plane + p] = z.re;
        }
    }
    let total = (re_sq + im_sq).sqrt();
    if total > 0.0 {
        let residual = im_sq.sqrt() / total;
        if residual > SYMMETRY_TOL {
            return Err(TubalError::SymmetryViolation { residual });
        }
    }
    DenseTensor3::new(xf.dims, data)
}

/// Whether Fourier slice `k` of a real tensor is itself real (`k = 0`, and
/// `k = n3/2` for even `n3`).
pub(crate) fn is_self_conjugate(k: usize, n3: usize) -> bool {
    k == 0 || 2 * k == n3
}
