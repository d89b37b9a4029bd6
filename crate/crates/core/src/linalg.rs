//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, Scalar};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::{CMat, RMat};

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// `(M − Mᵀ) / 2`.
pub fn antisymmetrize(m: &RMat) -> RMat {
    (m - m.transpose()) * 0.5
}

/// Largest absolute entry of `M − Mᵀ`.
pub fn max_asymmetry(m: &RMat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

/// `X + iY`.
pub fn complexify(x: &RMat, y: &RMat) -> CMat {
    x.zip_map(y, Complex64::new)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|v| v.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|v| v.im)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and the
/// eigenvector columns permuted to match.
pub fn sym_eigen_sorted(m: &RMat) -> (Vec<f64>, RMat) {
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = RMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_sym_eigenvalue(m: &RMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// QR sweeps allowed per dimension before a Schur attempt is abandoned.
const SCHUR_SWEEPS_PER_DIM: usize = 200;

/// Runs `schur` on `m`, then on orthogonal similarity transforms of it if the
/// shifted QR iteration stalls (it can on exactly nilpotent inputs). A
/// similarity leaves the eigenvalues unchanged.
fn eigen_with_retry<T, F>(m: &DMatrix<T>, mut schur: F) -> Vec<Complex64>
where
    F: FnMut(DMatrix<T>, usize) -> Option<Vec<Complex64>>,
    T: Scalar + nalgebra::ComplexField<RealField = f64> + Copy,
{
    let n = m.nrows();
    let budget = SCHUR_SWEEPS_PER_DIM * n.max(1);
    if let Some(ev) = schur(m.clone(), budget) {
        return ev;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        let q = random_orthogonal(n, &mut rng).map(|e| T::from_real(e));
        let rotated = q.transpose() * m * &q;
        if let Some(ev) = schur(rotated, budget) {
            return ev;
        }
    }
    panic!("Schur iteration failed to converge on a {n}x{n} matrix");
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
pub fn complex_eigenvalues(m: &CMat) -> Vec<Complex64> {
    if m.is_empty() {
        return Vec::new();
    }
    eigen_with_retry(m, |a, iters| {
        Schur::try_new(a, f64::EPSILON, iters).map(|s| {
            let t = s.unpack().1;
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        })
    })
}

/// Eigenvalues of a general real matrix.
pub fn real_matrix_eigenvalues(m: &RMat) -> Vec<Complex64> {
    if m.is_empty() {
        return Vec::new();
    }
    eigen_with_retry(m, |a, iters| Schur::try_new(a, f64::EPSILON, iters).map(|s| quasi_triangular_eigenvalues(&s.unpack().1)))
}

/// Eigenvalues of a real Schur factor, reading each 2×2 diagonal block
/// through a complex square root so a slightly negative discriminant cannot
/// produce NaN.
fn quasi_triangular_eigenvalues(t: &RMat) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mid = Complex64::new((a + d) / 2.0, 0.0);
            let disc = Complex64::new(((a - d) / 2.0).powi(2) + b * c, 0.0).sqrt();
            out.push(mid + disc);
            out.push(mid - disc);
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value of a real matrix.
pub fn spectral_norm(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `ln det M` for a symmetric positive definite matrix, via Cholesky.
pub fn log_det_spd(m: &RMat) -> Option<f64> {
    let chol = symmetrize(m).cholesky()?;
    let l = chol.l_dirty();
    Some((0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0)
}

/// Inverse of a symmetric positive definite matrix, via Cholesky.
pub fn spd_inverse(m: &RMat) -> Option<RMat> {
    let chol = symmetrize(m).cholesky()?;
    Some(symmetrize(&chol.inverse()))
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &RMat, b: &RMat) -> RMat {
    a.kronecker(b)
}

/// Relabels modes: returns `Pᵀ M P` for the permutation matrix with a single
/// 1 in row `a`, column `perm[a]`. Entry `(a, b)` of `M` lands on
/// `(perm[a], perm[b])`.
pub fn permute_congruence<T: Scalar + Copy>(m: &DMatrix<T>, perm: &[usize]) -> DMatrix<T> {
    let n = perm.len();
    let mut out = m.clone();
    for a in 0..n {
        for b in 0..n {
            out[(perm[a], perm[b])] = m[(a, b)];
        }
    }
    out
}

/// Inverse of [`permute_congruence`]: returns `P Z Pᵀ`.
pub fn unpermute_congruence<T: Scalar + Copy>(z: &DMatrix<T>, perm: &[usize]) -> DMatrix<T> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |a, b| z[(perm[a], perm[b])])
}

/// Dense permutation matrix with `P[(a, perm[a])] = 1`.
pub fn permutation_matrix(perm: &[usize]) -> RMat {
    let n = perm.len();
    let mut p = RMat::zeros(n, n);
    for (a, &col) in perm.iter().enumerate() {
        p[(a, col)] = 1.0;
    }
    p
}

/// True when `perm` is a permutation of `0..perm.len()`.
pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Haar-ish random orthogonal matrix: QR of a standard Gaussian matrix with
/// the signs fixed so that `diag(R) > 0`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    if n == 0 {
        return RMat::zeros(0, 0);
    }
    let g = RMat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonality defect `max|QᵀQ − I|`.
pub fn orthogonality_defect(q: &RMat) -> f64 {
    let n = q.ncols();
    max_abs(&(q.transpose() * q - RMat::identity(n, n)))
}

/// Removes row and column `k`.
pub fn remove_index<T: Scalar + Copy>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    m.clone().remove_row(k).remove_column(k)
}
