//! The t-product and the structural operators it is defined through.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TubalError};
use crate::fourier::{dft_mode3, idft_mode3, FourierTensor3};
use crate::tensor::{check_dims, DenseTensor3, Dims};

/// Block circulant matrix: block `(p, q)` is frontal slice `(p - q) mod n3`.
pub fn bcirc(x: &DenseTensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = x.dims();
    let slices = x.frontal_slices();
    let mut out = DMatrix::zeros(n1 * n3, n2 * n3);
    for p in 0..n3 {
        for q in 0..n3 {
            let k = (p + n3 - q) % n3;
            out.view_mut((p * n1, q * n2), (n1, n2)).copy_from(&slices[k]);
        }
    }
    out
}

/// Stacks the frontal slices vertically into an `n1*n3 x n2` matrix.
pub fn unfold(x: &DenseTensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = x.dims();
    let mut out = DMatrix::zeros(n1 * n3, n2);
    for k in 0..n3 {
        out.view_mut((k * n1, 0), (n1, n2))
            .copy_from(&x.frontal_slice(k));
    }
    out
}

/// Inverse of [`unfold`].
pub fn fold(m: &DMatrix<f64>, dims: Dims) -> Result<DenseTensor3> {
    check_dims(dims)?;
    let (n1, n2, n3) = dims;
    if m.shape() != (n1 * n3, n2) {
        return Err(TubalError::DimMismatch(format!(
            "fold: matrix is {:?}, expected {:?}",
            m.shape(),
            (n1 * n3, n2)
        )));
    }
    let slices: Vec<_> = (0..n3)
        .map(|k| m.view((k * n1, 0), (n1, n2)).into_owned())
        .collect();
    DenseTensor3::from_slices(&slices)
}

fn check_product_dims(a: Dims, b: Dims) -> Result<()> {
    if a.1 != b.0 || a.2 != b.2 {
        return Err(TubalError::DimMismatch(format!(
            "t-product of {}x{}x{} and {}x{}x{}",
            a.0, a.1, a.2, b.0, b.1, b.2
        )));
    }
    Ok(())
}

/// Slicewise product of two Fourier tensors.
pub(crate) fn fourier_product(a: &FourierTensor3, b: &FourierTensor3) -> Result<FourierTensor3> {
    check_product_dims(a.dims(), b.dims())?;
    let n3 = a.dims().2;
    let half: Vec<DMatrix<Complex64>> = (0..=n3 / 2).map(|k| a.slice(k) * b.slice(k)).collect();
    FourierTensor3::from_half_spectrum(half, n3)
}

/// t-product `A * B = fold(bcirc(A) unfold(B))`, evaluated slice by slice in
/// the Fourier domain.
pub fn tprod(a: &DenseTensor3, b: &DenseTensor3) -> Result<DenseTensor3> {
    check_product_dims(a.dims(), b.dims())?;
    let prod = fourier_product(&dft_mode3(a), &dft_mode3(b))?;
    idft_mode3(&prod)
}

/// Transposes every frontal slice and reverses the order of slices 2..n3.
pub fn conj_transpose(x: &DenseTensor3) -> DenseTensor3 {
    let (n1, n2, n3) = x.dims();
    let mut data = Vec::with_capacity(x.len());
    for k in 0..n3 {
        let src = (n3 - k) % n3;
        for j in 0..n1 {
            for i in 0..n2 {
                data.push(x.get(j, i, src));
            }
        }
    }
    DenseTensor3::from_parts_unchecked((n2, n1, n3), data)
}

/// Identity tensor: first frontal slice `I_n`, all others zero.
pub fn identity_tensor(n: usize, n3: usize) -> Result<DenseTensor3> {
    DenseTensor3::from_fn((n, n, n3), |i, j, k| if k == 0 && i == j { 1.0 } else { 0.0 })
}

/// `Q^* * Q` and `Q * Q^*` are both within `tol` of the identity (Frobenius).
pub fn is_orthogonal(q: &DenseTensor3, tol: f64) -> bool {
    let (n1, n2, n3) = q.dims();
    if n1 != n2 {
        return false;
    }
    let qt = conj_transpose(q);
    let id = match identity_tensor(n1, n3) {
        Ok(id) => id,
        Err(_) => return false,
    };
    let residual = |p: Result<DenseTensor3>| {
        p.and_then(|p| p.sub(&id))
            .map(|d| d.fro_norm())
            .unwrap_or(f64::INFINITY)
    };
    residual(tprod(&qt, q)) <= tol && residual(tprod(q, &qt)) <= tol
}

/// Every frontal slice is diagonal up to `tol`.
pub fn is_fdiagonal(s: &DenseTensor3, tol: f64) -> bool {
    let (n1, n2, n3) = s.dims();
    (0..n3).all(|k| {
        (0..n2).all(|j| (0..n1).all(|i| i == j || s.get(i, j, k).abs() <= tol))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tube(v: &[f64]) -> DenseTensor3 {
        DenseTensor3::new((1, 1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn bcirc_of_tube_is_circulant() {
        let c = bcirc(&tube(&[1.0, 2.0, 3.0]));
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 2.0, 2.0, 1.0, 3.0, 3.0, 2.0, 1.0]);
        assert_eq!(c, expected);
    }

    #[test]
    fn bcirc_single_slice() {
        let x = DenseTensor3::from_fn((2, 3, 1), |i, j, _| (i + 4 * j) as f64).unwrap();
        assert_eq!(bcirc(&x), x.frontal_slice(0));
    }

    #[test]
    fn unfold_layout_and_fold() {
        let x = DenseTensor3::from_fn((2, 2, 2), |i, j, k| (i + 2 * j + 4 * k) as f64).unwrap();
        let u = unfold(&x);
        assert_eq!(u.shape(), (4, 2));
        assert_eq!(u.view((0, 0), (2, 2)), x.frontal_slice(0));
        assert_eq!(u.view((2, 0), (2, 2)), x.frontal_slice(1));
        assert_eq!(fold(&u, x.dims()).unwrap(), x);
        assert!(fold(&u, (2, 2, 3)).is_err());
    }

    #[test]
    fn tube_product_is_circular_convolution() {
        let c = tprod(&tube(&[1.0, 2.0]), &tube(&[3.0, 4.0])).unwrap();
        assert!((c.get(0, 0, 0) - 11.0).abs() < 1e-12);
        assert!((c.get(0, 0, 1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tprod_rejects_mismatch() {
        let a = DenseTensor3::zeros((2, 3, 2)).unwrap();
        let b = DenseTensor3::zeros((2, 3, 2)).unwrap();
        assert!(tprod(&a, &b).is_err());
        let c = DenseTensor3::zeros((3, 3, 3)).unwrap();
        assert!(tprod(&a, &c).is_err());
    }

    #[test]
    fn conj_transpose_basics() {
        let m = DenseTensor3::from_fn((2, 3, 1), |i, j, _| (i * 3 + j) as f64).unwrap();
        let t = conj_transpose(&m);
        assert_eq!(t.frontal_slice(0), m.frontal_slice(0).transpose());
        let x = DenseTensor3::from_fn((2, 3, 4), |i, j, k| (i + 3 * j + 7 * k) as f64).unwrap();
        let xt = conj_transpose(&x);
        assert_eq!(xt.frontal_slice(1), x.frontal_slice(3).transpose());
        assert_eq!(conj_transpose(&xt), x);
    }

    #[test]
    fn identity_properties() {
        let id = identity_tensor(3, 1).unwrap();
        assert_eq!(id.frontal_slice(0), DMatrix::identity(3, 3));
        let id = identity_tensor(2, 4).unwrap();
        assert_eq!(conj_transpose(&id), id);
        let f = dft_mode3(&id);
        for s in f.slices() {
            assert!((s - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-14);
        }
        let x = DenseTensor3::from_fn((2, 3, 4), |i, j, k| (i * j + k) as f64 - 1.5).unwrap();
        let y = tprod(&id, &x).unwrap();
        assert!(y.sub(&x).unwrap().fro_norm() < 1e-12);
    }

    #[test]
    fn orthogonality_and_fdiagonal() {
        let id = identity_tensor(3, 4).unwrap();
        assert!(is_orthogonal(&id, 1e-12));
        assert!(!is_orthogonal(&id.scale(2.0), 1e-6));
        assert!(!is_orthogonal(&DenseTensor3::zeros((2, 3, 2)).unwrap(), 1e-6));

        assert!(is_fdiagonal(&DenseTensor3::zeros((3, 2, 2)).unwrap(), 0.0));
        let off = DenseTensor3::from_fn((2, 2, 3), |i, j, k| if i == 0 && j == 1 && k == 2 { 1e-3 } else { 0.0 }).unwrap();
        assert!(!is_fdiagonal(&off, 1e-6));
        assert!(is_fdiagonal(&off, 1e-2));
    }
}
