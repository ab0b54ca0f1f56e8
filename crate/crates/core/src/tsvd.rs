//! t-SVD and the quantities derived from it: tubal rank, average rank,
//! tensor nuclear norm, best tubal-rank-r approximation and index restriction.
//!
//! Every slice of the half spectrum (`k = 0..=n3/2`) is factorized
//! independently; the remaining slices follow by conjugate symmetry. Singular
//! values within a slice are sorted descending, so the `i`-th singular tube
//! collects the `i`-th largest singular value of every Fourier slice.
//!
//! Phase convention: the largest-magnitude entry of each left singular vector
//! is made real and positive (the paired right vector is rotated by the same
//! phase). Self-conjugate slices are factorized in real arithmetic so the
//! returned factors are exactly real after the inverse transform.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{conj_transpose, tprod};
use crate::error::{Result, TubalError};
use crate::fourier::{dft_mode3, idft_mode3, is_self_conjugate, FourierTensor3};
use crate::tensor::{DenseTensor3, Dims};

/// Default relative cutoff used by rank computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Factors of `X = U * S * V^*`.
#[derive(Clone, Debug)]
pub struct TsvdFactors {
    /// Orthogonal, `n1 x n1 x n3`.
    pub u: DenseTensor3,
    /// F-diagonal, `n1 x n2 x n3`.
    pub s: DenseTensor3,
    /// Orthogonal, `n2 x n2 x n3`.
    pub v: DenseTensor3,
}

impl TsvdFactors {
    /// Diagonal of the first frontal slice of `S`.
    pub fn first_slice_diag(&self) -> Vec<f64> {
        let kappa = self.s.n1().min(self.s.n2());
        (0..kappa).map(|i| self.s.get(i, i, 0)).collect()
    }

    /// `U * S * V^*`.
    pub fn reconstruct(&self) -> Result<DenseTensor3> {
        tprod(&tprod(&self.u, &self.s)?, &conj_transpose(&self.v))
    }
}

/// Ordered set of distinct singular-tube indices (0-based) below `kappa`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    kappa: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new(kappa: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(TubalError::InvalidArgument("duplicate index in index set".into()));
        }
        if let Some(&last) = v.last() {
            if last >= kappa {
                return Err(TubalError::InvalidArgument(format!(
                    "index {last} out of range for kappa = {kappa}"
                )));
            }
        }
        Ok(Self { kappa, indices: v })
    }

    pub fn empty(kappa: usize) -> Self {
        Self {
            kappa,
            indices: Vec::new(),
        }
    }

    pub fn full(kappa: usize) -> Self {
        Self {
            kappa,
            indices: (0..kappa).collect(),
        }
    }

    /// The first `r` indices `{0, .., r-1}`.
    pub fn leading(kappa: usize, r: usize) -> Result<Self> {
        Self::new(kappa, 0..r)
    }

    pub fn complement(&self) -> Self {
        Self {
            kappa: self.kappa,
            indices: (0..self.kappa).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.indices.iter()
    }
}

/// Average rank `rank(bdiag(X̄)) / n3`, kept as an exact fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AverageRank {
    pub bdiag_rank: usize,
    pub n3: usize,
}

impl AverageRank {
    pub fn value(&self) -> f64 {
        self.bdiag_rank as f64 / self.n3 as f64
    }
}

/// Thin SVD of one Fourier slice, singular values descending.
#[derive(Clone, Debug)]
pub(crate) struct SliceSvd {
    pub u: Option<DMatrix<Complex64>>,
    pub sigma: Vec<f64>,
    pub v: Option<DMatrix<Complex64>>,
}

fn normalize_phases<T: ComplexField<RealField = f64>>(u: &mut DMatrix<T>, v: &mut DMatrix<T>) {
    for c in 0..u.ncols() {
        let col = u.column(c);
        let Some((pos, modulus)) = col
            .iter()
            .enumerate()
            .map(|(p, z)| (p, z.clone().modulus()))
            .fold(None, |best: Option<(usize, f64)>, (p, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((p, m)),
            })
        else {
            continue;
        };
        if modulus == 0.0 {
            continue;
        }
        let phase = col[pos].clone().signum().conjugate();
        for z in u.column_mut(c).iter_mut() {
            *z = z.clone() * phase.clone();
        }
        for z in v.column_mut(c).iter_mut() {
            *z = z.clone() * phase.clone();
        }
    }
}

fn svd_typed<T>(m: DMatrix<T>, vectors: bool) -> Result<(Vec<f64>, Option<(DMatrix<T>, DMatrix<T>)>)>
where
    T: ComplexField<RealField = f64> + faer::traits::ComplexField<Real = f64> + Copy,
{
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<T>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let failed = |_| TubalError::Numerical("slice SVD did not converge".into());
    if !vectors {
        let sigma = fm.singular_values().map_err(failed)?;
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(TubalError::NonFinite("singular value".into()));
        }
        return Ok((sigma, None));
    }
    let svd = fm.thin_svd().map_err(failed)?;
    let sigma: Vec<f64> = svd
        .S()
        .column_vector()
        .iter()
        .map(|&s| ComplexField::real(s))
        .collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(TubalError::NonFinite("singular value".into()));
    }
    let (fu, fv) = (svd.U(), svd.V());
    let mut u = DMatrix::<T>::from_fn(rows, sigma.len(), |i, j| fu[(i, j)]);
    let mut v = DMatrix::<T>::from_fn(cols, sigma.len(), |i, j| fv[(i, j)]);
    normalize_phases(&mut u, &mut v);
    Ok((sigma, Some((u, v))))
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Thin SVD of Fourier slice `k` out of `n3`.
pub(crate) fn slice_svd(k: usize, n3: usize, slice: &DMatrix<Complex64>, vectors: bool) -> Result<SliceSvd> {
    if is_self_conjugate(k, n3) {
        let (sigma, uv) = svd_typed(slice.map(|z| z.re), vectors)?;
        let (u, v) = match uv {
            Some((u, v)) => (Some(to_complex(&u)), Some(to_complex(&v))),
            None => (None, None),
        };
        Ok(SliceSvd { u, sigma, v })
    } else {
        let (sigma, uv) = svd_typed(slice.clone(), vectors)?;
        let (u, v) = uv.unzip();
        Ok(SliceSvd { u, sigma, v })
    }
}

/// Extends orthonormal columns to a full orthonormal basis of `F^n`.
fn complete_basis<T: ComplexField<RealField = f64>>(thin: DMatrix<T>) -> DMatrix<T> {
    let (n, r) = thin.shape();
    if r >= n {
        return thin;
    }
    let mut aug = DMatrix::<T>::zeros(n, r + n);
    aug.view_mut((0, 0), (n, r)).copy_from(&thin);
    aug.view_mut((0, r), (n, n)).fill_with_identity();
    let q = aug.qr().q();
    let mut out = DMatrix::<T>::zeros(n, n);
    out.view_mut((0, 0), (n, r)).copy_from(&thin);
    out.view_mut((0, r), (n, n - r))
        .copy_from(&q.view((0, r), (n, n - r)));
    out
}

/// Full SVD factors `(U n1xn1, sigma, V n2xn2)` of one Fourier slice.
fn slice_full_svd(
    k: usize,
    n3: usize,
    slice: &DMatrix<Complex64>,
) -> Result<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
    if is_self_conjugate(k, n3) {
        let (sigma, uv) = svd_typed(slice.map(|z| z.re), true)?;
        let (u, v) = uv.expect("vectors requested");
        Ok((
            to_complex(&complete_basis(u)),
            sigma,
            to_complex(&complete_basis(v)),
        ))
    } else {
        let (sigma, uv) = svd_typed(slice.clone(), true)?;
        let (u, v) = uv.expect("vectors requested");
        Ok((complete_basis(u), sigma, complete_basis(v)))
    }
}

/// Number of Fourier slices represented by half-spectrum slice `k`.
pub(crate) fn multiplicity(k: usize, n3: usize) -> usize {
    if is_self_conjugate(k, n3) {
        1
    } else {
        2
    }
}

/// Thin SVDs of the half spectrum of a tensor.
#[derive(Clone, Debug)]
pub(crate) struct FourierSvd {
    pub dims: Dims,
    pub slices: Vec<SliceSvd>,
}

impl FourierSvd {
    pub fn of_fourier(xf: &FourierTensor3, vectors: bool) -> Result<Self> {
        let n3 = xf.dims().2;
        let slices = (0..=n3 / 2)
            .map(|k| slice_svd(k, n3, xf.slice(k), vectors))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims: xf.dims(),
            slices,
        })
    }

    pub fn of(x: &DenseTensor3, vectors: bool) -> Result<Self> {
        Self::of_fourier(&dft_mode3(x), vectors)
    }

    fn n3(&self) -> usize {
        self.dims.2
    }

    /// `S(i, i, 1)` for every `i`: the mean over all Fourier slices of the
    /// `i`-th singular value.
    pub fn first_slice_diag(&self) -> Vec<f64> {
        let n3 = self.n3();
        let kappa = self.dims.0.min(self.dims.1);
        let mut out = vec![0.0; kappa];
        for (k, s) in self.slices.iter().enumerate() {
            let w = multiplicity(k, n3) as f64;
            for (o, sv) in out.iter_mut().zip(&s.sigma) {
                *o += w * sv;
            }
        }
        out.iter_mut().for_each(|o| *o /= n3 as f64);
        out
    }

    /// `||bdiag(X̄)||_*`.
    pub fn bdiag_nuclear_norm(&self) -> f64 {
        let n3 = self.n3();
        self.slices
            .iter()
            .enumerate()
            .map(|(k, s)| multiplicity(k, n3) as f64 * s.sigma.iter().sum::<f64>())
            .sum()
    }

    pub fn max_singular_value(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.sigma.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Recomposes `sum_i w_i(sigma) u_i v_i^H` per slice, where `weight(i, sigma)`
    /// returns the replacement singular value for tube `i`.
    pub fn recompose(&self, weight: impl Fn(usize, f64) -> f64) -> Result<DenseTensor3> {
        let (n1, n2, n3) = self.dims;
        let half = self
            .slices
            .iter()
            .map(|s| {
                let (u, v) = match (&s.u, &s.v) {
                    (Some(u), Some(v)) => (u, v),
                    _ => {
                        return Err(TubalError::InvalidArgument(
                            "singular vectors were not computed".into(),
                        ))
                    }
                };
                let mut us = u.clone();
                for (c, &sv) in s.sigma.iter().enumerate() {
                    let w = weight(c, sv);
                    us.column_mut(c).scale_mut(w);
                }
                let mut out = DMatrix::<Complex64>::zeros(n1, n2);
                out.gemm(Complex64::new(1.0, 0.0), &us, &v.adjoint(), Complex64::new(0.0, 0.0));
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        idft_mode3(&FourierTensor3::from_half_spectrum(half, n3)?)
    }
}

/// t-SVD `X = U * S * V^*` computed slice by slice in the Fourier domain.
pub fn tsvd(x: &DenseTensor3) -> Result<TsvdFactors> {
    let (n1, n2, n3) = x.dims();
    if x.inf_norm() == 0.0 {
        return Ok(TsvdFactors {
            u: crate::algebra::identity_tensor(n1, n3)?,
            s: DenseTensor3::zeros(x.dims())?,
            v: crate::algebra::identity_tensor(n2, n3)?,
        });
    }
    let xf = dft_mode3(x);
    let mut us = Vec::with_capacity(n3 / 2 + 1);
    let mut ss = Vec::with_capacity(n3 / 2 + 1);
    let mut vs = Vec::with_capacity(n3 / 2 + 1);
    for k in 0..=n3 / 2 {
        let (u, sigma, v) = slice_full_svd(k, n3, xf.slice(k))?;
        let mut s = DMatrix::<Complex64>::zeros(n1, n2);
        for (i, sv) in sigma.iter().enumerate() {
            s[(i, i)] = Complex64::new(*sv, 0.0);
        }
        us.push(u);
        ss.push(s);
        vs.push(v);
    }
    Ok(TsvdFactors {
        u: idft_mode3(&FourierTensor3::from_half_spectrum(us, n3)?)?,
        s: idft_mode3(&FourierTensor3::from_half_spectrum(ss, n3)?)?,
        v: idft_mode3(&FourierTensor3::from_half_spectrum(vs, n3)?)?,
    })
}

/// Number of singular tubes with `S(i,i,1) > tol * S(1,1,1)`.
pub fn tubal_rank(x: &DenseTensor3, tol: f64) -> Result<usize> {
    let diag = FourierSvd::of(x, false)?.first_slice_diag();
    let top = diag.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(diag.iter().filter(|&&s| s > tol * top).count())
}

/// `rank(bdiag(X̄)) / n3`, counting singular values above `tol` times the
/// largest singular value of any Fourier slice.
pub fn average_rank(x: &DenseTensor3, tol: f64) -> Result<AverageRank> {
    let fs = FourierSvd::of(x, false)?;
    let n3 = x.n3();
    let cutoff = tol * fs.max_singular_value();
    let bdiag_rank = if fs.max_singular_value() <= 0.0 {
        0
    } else {
        fs.slices
            .iter()
            .enumerate()
            .map(|(k, s)| multiplicity(k, n3) * s.sigma.iter().filter(|&&v| v > cutoff).count())
            .sum()
    };
    Ok(AverageRank { bdiag_rank, n3 })
}

/// Tensor nuclear norm `sum_i S(i,i,1)`.
pub fn tnn(x: &DenseTensor3) -> Result<f64> {
    Ok(FourierSvd::of(x, false)?.bdiag_nuclear_norm() / x.n3() as f64)
}

/// `X_Γ = sum_{i in Γ} U(:,i,:) * S(i,i,:) * V(:,i,:)^*`.
pub fn restrict(x: &DenseTensor3, g: &IndexSet) -> Result<DenseTensor3> {
    let kappa = x.n1().min(x.n2());
    if g.kappa() != kappa {
        return Err(TubalError::DimMismatch(format!(
            "index set over {} tubes applied to a tensor with {kappa}",
            g.kappa()
        )));
    }
    if g.is_empty() {
        return DenseTensor3::zeros(x.dims());
    }
    FourierSvd::of(x, true)?.recompose(|i, s| if g.contains(i) { s } else { 0.0 })
}

/// Best tubal-rank-`r` approximation and its residual `(X_max(r), X_-max(r))`.
pub fn truncate(x: &DenseTensor3, r: usize) -> Result<(DenseTensor3, DenseTensor3)> {
    let kappa = x.n1().min(x.n2());
    if r > kappa {
        return Err(TubalError::InvalidArgument(format!(
            "truncation rank {r} exceeds min(n1, n2) = {kappa}"
        )));
    }
    let head = restrict(x, &IndexSet::leading(kappa, r)?)?;
    let tail = x.sub(&head)?;
    Ok((head, tail))
}
