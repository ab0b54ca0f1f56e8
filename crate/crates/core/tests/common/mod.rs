//! Independent oracles shared by the integration tests. Nothing here calls
//! the Fourier-domain code paths of the crate.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tubal_core::{DenseTensor3, Dims};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_tensor(rng: &mut ChaCha8Rng, dims: Dims) -> DenseTensor3 {
    DenseTensor3::from_fn(dims, |_, _, _| StandardNormal.sample(rng)).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> Dims {
    (rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max))
}

/// Frontal slice `k` of the circular convolution along mode 3:
/// `C_k = sum_l A_l B_{(k - l) mod n3}`.
pub fn tprod_oracle(a: &DenseTensor3, b: &DenseTensor3) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    let n4 = b.n2();
    assert_eq!(b.n1(), n2);
    let mut slices = vec![DMatrix::<f64>::zeros(n1, n4); n3];
    for (k, out) in slices.iter_mut().enumerate() {
        for l in 0..n3 {
            *out += a.frontal_slice(l) * b.frontal_slice((k + n3 - l) % n3);
        }
    }
    DenseTensor3::from_slices(&slices).unwrap()
}

/// Block circulant matrix written out from the definition.
pub fn bcirc_oracle(x: &DenseTensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = x.dims();
    DMatrix::from_fn(n1 * n3, n2 * n3, |row, col| {
        let (p, i) = (row / n1, row % n1);
        let (q, j) = (col / n2, col % n2);
        x.get(i, j, (p + n3 - q) % n3)
    })
}

/// `fold(bcirc(A) unfold(B))` from the explicit matrices.
pub fn tprod_bcirc_oracle(a: &DenseTensor3, b: &DenseTensor3) -> DenseTensor3 {
    let (n1, _, n3) = a.dims();
    let n4 = b.n2();
    let unfolded = DMatrix::from_fn(b.n1() * n3, n4, |row, j| b.get(row % b.n1(), j, row / b.n1()));
    let c = bcirc_oracle(a) * unfolded;
    DenseTensor3::from_fn((n1, n4, n3), |i, j, k| c[(k * n1 + i, j)]).unwrap()
}

/// `O(n3^2)` DFT of every tube.
pub fn naive_dft(x: &DenseTensor3) -> Vec<DMatrix<Complex64>> {
    let (n1, n2, n3) = x.dims();
    (0..n3)
        .map(|k| {
            DMatrix::from_fn(n1, n2, |i, j| {
                (0..n3)
                    .map(|l| {
                        let angle = -2.0 * std::f64::consts::PI * (k * l) as f64 / n3 as f64;
                        Complex64::from_polar(x.get(i, j, l), angle)
                    })
                    .sum()
            })
        })
        .collect()
}

/// SVD of a real matrix from the symmetric eigenproblem of its dilation
/// `[[0, A], [A^T, 0]]`, whose eigenpairs are `(±s_i, (u_i, ±v_i) / sqrt 2)`.
/// Returns `(U, s, V)` with `min(m, n)` columns, `s` descending.
pub fn dilation_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut dil = DMatrix::zeros(m + n, m + n);
    dil.view_mut((0, m), (m, n)).copy_from(a);
    dil.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = SymmetricEigen::new(dil);
    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut u = DMatrix::zeros(m, k);
    let mut v = DMatrix::zeros(n, k);
    let mut s = Vec::with_capacity(k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let w = eig.eigenvectors.column(i);
        let scale = 2f64.sqrt();
        u.set_column(c, &(w.rows(0, m) * scale));
        v.set_column(c, &(w.rows(m, n) * scale));
        s.push(eig.eigenvalues[i].max(0.0));
    }
    (u, s, v)
}

/// Singular values of a complex matrix via the symmetric eigenproblem of the
/// real embedding `[[Re, -Im], [Im, Re]]`, whose singular values are those of
/// the complex matrix, each repeated twice.
pub fn complex_singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let (m, n) = a.shape();
    let emb = DMatrix::from_fn(2 * m, 2 * n, |r, c| {
        let z = a[(r % m, c % n)];
        match (r < m, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (_, sv, _) = dilation_svd(&emb);
    sv.into_iter().step_by(2).take(m.min(n)).collect()
}

/// `(1/n3) ||bdiag(X̄)||_*` from the naive DFT.
pub fn tnn_oracle(x: &DenseTensor3) -> f64 {
    let n3 = x.n3() as f64;
    naive_dft(x)
        .iter()
        .map(|s| complex_singular_values(s).iter().sum::<f64>())
        .sum::<f64>()
        / n3
}

/// `||bdiag(X̄)||_F` from the naive DFT.
pub fn bdiag_fro_oracle(x: &DenseTensor3) -> f64 {
    naive_dft(x)
        .iter()
        .map(|s| s.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Numerical rank of a real matrix, relative cutoff on the top singular value.
pub fn matrix_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let (_, sv, _) = dilation_svd(a);
    let top = sv[0];
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Singular value thresholding of a real matrix.
pub fn matrix_svt(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (u, s, v) = dilation_svd(a);
    let shrunk = DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|s| (s - tau).max(0.0))));
    u * shrunk * v.transpose()
}

/// `vec(x)` in the documented storage order, from the index formula.
pub fn vec_oracle(x: &DenseTensor3) -> DVector<f64> {
    let (n1, n2, n3) = x.dims();
    let mut v = DVector::zeros(n1 * n2 * n3);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                v[k * n1 * n2 + j * n1 + i] = x.get(i, j, k);
            }
        }
    }
    v
}

pub fn rel_err(a: &DenseTensor3, b: &DenseTensor3) -> f64 {
    let d = a.sub(b).unwrap().fro_norm();
    let s = b.fro_norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}
