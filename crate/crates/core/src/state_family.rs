//! The family of pure Gaussian states preparable with a passive Hamiltonian
//! and one reservoir acting on one mode.
//!
//! A member has graph matrix
//!
//! ```text
//! Z = 𝒫ᵀ [ z̄   0      ] 𝒫,     Z̄ = diag(Z̃₁, …)
//!        [ 0   𝒬ᵀZ̄𝒬  ]
//! ```
//!
//! with `Im z̄ > 0`, `𝒫` a permutation, `𝒬` real orthogonal and every 2×2
//! block `Z̃ⱼ` one of the two members of [`DeltaPair`]. For even `N` the first
//! block of `Z̄` is the scalar `−1/z̄`.
//!
//! Membership is decided constructively: find a mode `ℓ` with a vanishing
//! off-diagonal row, require the remaining block to be diagonalizable by a
//! real orthogonal matrix (equivalently, its real and imaginary parts
//! commute), and match its spectrum against the multiset
//! `{z̄, −1/z̄}` with the parity-dependent multiplicities.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::gaussian_states::{GraphMatrix, StateError, DEFAULT_VALIDATION_TOL};
use crate::linalg::{self, cmax_abs, max_abs};
use crate::{CMat, RMat};

/// Default relative tolerance for [`membership`].
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;
/// Default tolerance on `‖𝒬ᵀ𝒬 − I‖`.
pub const DEFAULT_ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("z̄ = {0} is not in the upper half plane")]
    NotInLambda(Complex64),
    #[error("expected {expected} block signs for {n_modes} modes, got {got}")]
    BadSignCount { n_modes: usize, expected: usize, got: usize },
    #[error("invalid permutation {0:?}")]
    BadPermutation(Vec<usize>),
    #[error("𝒬 is not orthogonal (defect {0:e})")]
    NotOrthogonal(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Why [`membership`] rejected a graph matrix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("no mode is decoupled from the others (smallest off-diagonal row max {smallest_row_max:e})")]
    NoDecoupledMode { smallest_row_max: f64 },
    #[error("real and imaginary parts of the remaining block do not commute (residual {residual:e})")]
    NonCommutingParts { residual: f64 },
    #[error("spectrum of the remaining block does not match the family: {0}")]
    WrongSpectrum(String),
    #[error("z̄ = {0} is not in the upper half plane")]
    NotInLambda(Complex64),
}

impl Rejection {
    /// Stable identifier used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::NoDecoupledMode { .. } => "NoDecoupledMode",
            Rejection::NonCommutingParts { .. } => "NonCommutingParts",
            Rejection::WrongSpectrum(_) => "WrongSpectrum",
            Rejection::NotInLambda(_) => "NotInLambda",
        }
    }
}

/// Which of the two 2×2 blocks is used: `Plus` has off-diagonal `+b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSign {
    Plus,
    Minus,
}

impl BlockSign {
    pub fn as_i8(self) -> i8 {
        match self {
            BlockSign::Plus => 1,
            BlockSign::Minus => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(BlockSign::Plus),
            -1 => Some(BlockSign::Minus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n_modes: usize) -> Self {
        if n_modes % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Number of 2×2 blocks in `Z̄` for `n_modes` modes.
pub fn block_count(n_modes: usize) -> usize {
    match Parity::of(n_modes) {
        Parity::Odd => (n_modes - 1) / 2,
        Parity::Even => n_modes.saturating_sub(2) / 2,
    }
}

/// Parameters selecting one member of the family.
///
/// `perm[a]` is the mode that slot `a` of the reduced form maps to, so the
/// reservoir mode is `perm[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams {
    pub n_modes: usize,
    pub zbar: Complex64,
    pub perm: Vec<usize>,
    pub q_orth: RMat,
    pub block_signs: Vec<BlockSign>,
}

impl FamilyParams {
    pub fn new(
        zbar: Complex64,
        perm: Vec<usize>,
        q_orth: RMat,
        block_signs: Vec<BlockSign>,
    ) -> Result<Self, FamilyError> {
        let params = Self { n_modes: perm.len(), zbar, perm, q_orth, block_signs };
        params.validate(DEFAULT_ORTHOGONALITY_TOL)?;
        Ok(params)
    }

    /// Identity permutation and identity `𝒬`, all blocks `Plus`.
    pub fn canonical(n_modes: usize, zbar: Complex64) -> Result<Self, FamilyError> {
        let m = n_modes.saturating_sub(1);
        Self::new(
            zbar,
            (0..n_modes).collect(),
            RMat::identity(m, m),
            vec![BlockSign::Plus; block_count(n_modes)],
        )
    }

    /// Random member: `Re z̄ ∈ [−1, 1]`, `Im z̄ ∈ [0.3, 2.5]`, uniform
    /// permutation, `𝒬` from QR of a Gaussian matrix, random signs.
    pub fn random<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Self {
        let zbar = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(0.3..=2.5));
        let mut perm: Vec<usize> = (0..n_modes).collect();
        perm.shuffle(rng);
        let q_orth = linalg::random_orthogonal(n_modes.saturating_sub(1), rng);
        let block_signs = (0..block_count(n_modes))
            .map(|_| if rng.random_bool(0.5) { BlockSign::Plus } else { BlockSign::Minus })
            .collect();
        Self { n_modes, zbar, perm, q_orth, block_signs }
    }

    pub fn validate(&self, tol_orth: f64) -> Result<(), FamilyError> {
        let n = self.n_modes;
        if n == 0 || self.perm.len() != n {
            return Err(FamilyError::ShapeMismatch(format!("perm has {} entries for {n} modes", self.perm.len())));
        }
        if !(self.zbar.im > 0.0) {
            return Err(FamilyError::NotInLambda(self.zbar));
        }
        if !linalg::is_permutation(&self.perm) {
            return Err(FamilyError::BadPermutation(self.perm.clone()));
        }
        if self.q_orth.nrows() != n - 1 || self.q_orth.ncols() != n - 1 {
            return Err(FamilyError::ShapeMismatch(format!(
                "𝒬 must be {m}x{m}, got {}x{}",
                self.q_orth.nrows(),
                self.q_orth.ncols(),
                m = n - 1
            )));
        }
        let defect = linalg::orthogonality_defect(&self.q_orth);
        if defect > tol_orth {
            return Err(FamilyError::NotOrthogonal(defect));
        }
        let expected = block_count(n);
        if self.block_signs.len() != expected {
            return Err(FamilyError::BadSignCount { n_modes: n, expected, got: self.block_signs.len() });
        }
        Ok(())
    }

    /// The reservoir-coupled mode, `perm[0]`.
    pub fn ell(&self) -> usize {
        self.perm[0]
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.n_modes)
    }
}

/// The two 2×2 blocks with spectrum `{z̄, −1/z̄}`:
/// `[[a, ±b], [±b, a]]` with `a = (z̄² − 1)/(2z̄)`, `b = (z̄² + 1)/(2z̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPair {
    pub zbar: Complex64,
    pub plus: CMat,
    pub minus: CMat,
}

impl DeltaPair {
    pub fn member(&self, sign: BlockSign) -> &CMat {
        match sign {
            BlockSign::Plus => &self.plus,
            BlockSign::Minus => &self.minus,
        }
    }
}

pub fn delta_pair(zbar: Complex64) -> Result<DeltaPair, FamilyError> {
    if !(zbar.im > 0.0) {
        return Err(FamilyError::NotInLambda(zbar));
    }
    let two_z = zbar * 2.0;
    let z2 = zbar * zbar;
    let a = (z2 - 1.0) / two_z;
    let b = (z2 + 1.0) / two_z;
    Ok(DeltaPair {
        zbar,
        plus: CMat::from_row_slice(2, 2, &[a, b, b, a]),
        minus: CMat::from_row_slice(2, 2, &[a, -b, -b, a]),
    })
}

/// `Z̄ = diag(Z̃₁, …)` of size `(N−1) × (N−1)`.
pub fn block_diagonal(params: &FamilyParams) -> Result<CMat, FamilyError> {
    let m = params.n_modes - 1;
    let pair = delta_pair(params.zbar)?;
    let mut zb = CMat::zeros(m, m);
    let mut offset = 0;
    if params.parity() == Parity::Even {
        zb[(0, 0)] = -params.zbar.inv();
        offset = 1;
    }
    for sign in &params.block_signs {
        zb.view_mut((offset, offset), (2, 2)).copy_from(pair.member(*sign));
        offset += 2;
    }
    Ok(zb)
}

/// Assembles the graph matrix selected by `params`.
pub fn build_graph(params: &FamilyParams) -> Result<GraphMatrix, FamilyError> {
    params.validate(DEFAULT_ORTHOGONALITY_TOL)?;
    let n = params.n_modes;
    let zb = block_diagonal(params)?;
    let q = linalg::to_complex(&params.q_orth);
    let inner = q.transpose() * zb * &q;
    let mut reduced = CMat::zeros(n, n);
    reduced[(0, 0)] = params.zbar;
    if n > 1 {
        reduced.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inner);
    }
    let z = linalg::permute_congruence(&reduced, &params.perm);
    let scale = cmax_abs(&z).max(1.0);
    Ok(GraphMatrix::from_complex(&z, DEFAULT_VALIDATION_TOL.max(1e-12 * scale))?)
}

/// Whether a remaining eigenvalue was matched to `z̄` or to `−1/z̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenKind {
    Zbar,
    MinusInverse,
}

/// Evidence that a graph matrix belongs to the family.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipCertificate {
    /// Reservoir mode.
    pub ell: usize,
    pub zbar: Complex64,
    /// Columns are real orthonormal eigenvectors of the block left after
    /// deleting mode `ell`, in the order of `spectrum`.
    pub q_orth: RMat,
    pub spectrum: Vec<Complex64>,
    pub kinds: Vec<EigenKind>,
    pub parity: Parity,
    /// Every mode whose off-diagonal row vanished. More than one entry means
    /// the certificate is not unique.
    pub decoupled_modes: Vec<usize>,
}

impl MembershipCertificate {
    pub fn n_modes(&self) -> usize {
        self.spectrum.len() + 1
    }

    /// Regroups the eigenvectors into `Plus` blocks and returns parameters
    /// whose [`build_graph`] reproduces the certified matrix.
    pub fn family_params(&self) -> Result<FamilyParams, FamilyError> {
        let n = self.n_modes();
        let mut perm = vec![self.ell];
        perm.extend((0..n).filter(|&k| k != self.ell));

        let zs: Vec<usize> = (0..self.kinds.len()).filter(|&k| self.kinds[k] == EigenKind::Zbar).collect();
        let mut inv: Vec<usize> =
            (0..self.kinds.len()).filter(|&k| self.kinds[k] == EigenKind::MinusInverse).collect();

        let m = n - 1;
        let mut q = RMat::zeros(m, m);
        let mut row = 0;
        if self.parity == Parity::Even && m > 0 {
            let k = inv.remove(0);
            q.row_mut(row).copy_from(&self.q_orth.column(k).transpose());
            row += 1;
        }
        for (&a, &b) in zs.iter().zip(inv.iter()) {
            let ua = self.q_orth.column(a);
            let ub = self.q_orth.column(b);
            q.row_mut(row).copy_from(&((ua + ub) * FRAC_1_SQRT_2).transpose());
            q.row_mut(row + 1).copy_from(&((ua - ub) * FRAC_1_SQRT_2).transpose());
            row += 2;
        }
        FamilyParams::new(self.zbar, perm, q, vec![BlockSign::Plus; block_count(n)])
    }
}

/// Jointly diagonalizes commuting real symmetric `xb`, `yb` with one real
/// orthogonal matrix: `Qᵀ(X + iY)Q = diag(d)`.
///
/// `tol` is relative to `s = max(1, max|X|, max|Y|)`: the commutator must be
/// below `tol·s²` and the off-diagonal residual below `tol·s`. Eigenvalues
/// are sorted by real part, then imaginary part; each eigenvector column is
/// signed so its largest entry is positive.
pub fn joint_diag_commuting(xb: &RMat, yb: &RMat, tol: f64) -> Result<(RMat, Vec<Complex64>), Rejection> {
    let n = xb.nrows();
    if n == 0 {
        return Ok((RMat::zeros(0, 0), Vec::new()));
    }
    let s = max_abs(xb).max(max_abs(yb)).max(1.0);
    let commutator = max_abs(&(xb * yb - yb * xb));
    if commutator > tol * s * s {
        return Err(Rejection::NonCommutingParts { residual: commutator });
    }

    // Diagonalize Y, then X inside each numerically degenerate eigenspace of Y.
    let (yvals, mut u) = linalg::sym_eigen_sorted(yb);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && yvals[end] - yvals[end - 1] <= tol * s {
            end += 1;
        }
        if end - start > 1 {
            let basis = u.columns(start, end - start).into_owned();
            let (_, w) = linalg::sym_eigen_sorted(&(basis.transpose() * xb * &basis));
            u.columns_mut(start, end - start).copy_from(&(basis * w));
        }
        start = end;
    }

    let z = linalg::complexify(xb, yb);
    let uc = linalg::to_complex(&u);
    let d = uc.transpose() * z * &uc;
    let mut residual = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                residual = residual.max(d[(i, j)].norm());
            }
        }
    }
    if residual > tol * s {
        return Err(Rejection::NonCommutingParts { residual });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[(a, a)].re.total_cmp(&d[(b, b)].re).then(d[(a, a)].im.total_cmp(&d[(b, b)].im)));
    let mut q = RMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).into_owned();
        let pivot = col.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() + 1e-12 { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
        q.set_column(dst, &col);
    }
    let values = order.iter().map(|&k| d[(k, k)]).collect();
    Ok((q, values))
}

/// Decides whether `z` belongs to the family. `tol` is relative to
/// `max(1, max|Zᵢⱼ|)`.
///
/// Every decoupled mode is tried in increasing order; the first that passes
/// is certified. If none passes, the rejection for the smallest decoupled
/// mode is returned.
pub fn membership(z: &GraphMatrix, tol: f64) -> Result<MembershipCertificate, Rejection> {
    let zc = z.z();
    let n = z.n_modes();
    let s = cmax_abs(&zc).max(1.0);
    let tol_s = tol * s;

    let row_max: Vec<f64> =
        (0..n).map(|l| (0..n).filter(|&j| j != l).map(|j| zc[(l, j)].norm()).fold(0.0, f64::max)).collect();
    let decoupled: Vec<usize> = (0..n).filter(|&l| row_max[l] <= tol_s).collect();
    if decoupled.is_empty() {
        let smallest_row_max = row_max.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Rejection::NoDecoupledMode { smallest_row_max });
    }

    let mut first_rejection = None;
    for &ell in &decoupled {
        match certify_candidate(&zc, ell, tol, tol_s) {
            Ok(mut cert) => {
                cert.decoupled_modes = decoupled.clone();
                return Ok(cert);
            }
            Err(r) => {
                first_rejection.get_or_insert(r);
            }
        }
    }
    Err(first_rejection.expect("at least one candidate was tried"))
}

/// Certifies `z` with a prescribed reservoir mode `ell`. Useful when several
/// modes are decoupled and the caller knows which one the reservoir acts on.
pub fn certify_mode(z: &GraphMatrix, ell: usize, tol: f64) -> Result<MembershipCertificate, Rejection> {
    let zc = z.z();
    let n = z.n_modes();
    assert!(ell < n, "mode index {ell} out of range for {n} modes");
    let s = cmax_abs(&zc).max(1.0);
    let row_max = (0..n).filter(|&j| j != ell).map(|j| zc[(ell, j)].norm()).fold(0.0, f64::max);
    if row_max > tol * s {
        return Err(Rejection::NoDecoupledMode { smallest_row_max: row_max });
    }
    certify_candidate(&zc, ell, tol, tol * s)
}

fn certify_candidate(zc: &CMat, ell: usize, tol: f64, tol_s: f64) -> Result<MembershipCertificate, Rejection> {
    let n = zc.nrows();
    let zbar = zc[(ell, ell)];
    if !(zbar.im > 0.0) {
        return Err(Rejection::NotInLambda(zbar));
    }
    let rest = linalg::remove_index(zc, ell);
    let (q_orth, spectrum) = joint_diag_commuting(&linalg::real_part(&rest), &linalg::imag_part(&rest), tol)?;

    let parity = Parity::of(n);
    let (want_zbar, want_inv) = match parity {
        Parity::Odd => ((n - 1) / 2, (n - 1) / 2),
        Parity::Even => (n / 2 - 1, n / 2),
    };
    let inv = -zbar.inv();
    let degenerate = (zbar - inv).norm() <= tol_s;

    let mut kinds = Vec::with_capacity(spectrum.len());
    for (k, d) in spectrum.iter().enumerate() {
        let dz = (d - zbar).norm();
        let di = (d - inv).norm();
        if dz.min(di) > tol_s {
            return Err(Rejection::WrongSpectrum(format!(
                "eigenvalue {d} is {:.3e} away from z̄ = {zbar} and from -1/z̄ = {inv}",
                dz.min(di)
            )));
        }
        let kind = if degenerate {
            if k < want_zbar {
                EigenKind::Zbar
            } else {
                EigenKind::MinusInverse
            }
        } else if dz <= di {
            EigenKind::Zbar
        } else {
            EigenKind::MinusInverse
        };
        kinds.push(kind);
    }
    let got_zbar = kinds.iter().filter(|k| **k == EigenKind::Zbar).count();
    let got_inv = kinds.len() - got_zbar;
    if got_zbar != want_zbar || got_inv != want_inv {
        return Err(Rejection::WrongSpectrum(format!(
            "multiplicities ({got_zbar} x z̄, {got_inv} x -1/z̄), expected ({want_zbar}, {want_inv})"
        )));
    }
    Ok(MembershipCertificate { ell, zbar, q_orth, spectrum, kinds, parity, decoupled_modes: vec![ell] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delta_pair_at_i_is_identity_times_i() {
        let pair = delta_pair(c(0.0, 1.0)).unwrap();
        let expected = CMat::identity(2, 2) * c(0.0, 1.0);
        assert!(cmax_abs(&(&pair.plus - &expected)) < 1e-15);
        assert!(cmax_abs(&(&pair.minus - &expected)) < 1e-15);
    }

    #[test]
    fn delta_pair_at_2i() {
        let pair = delta_pair(c(0.0, 2.0)).unwrap();
        assert!((pair.plus[(0, 0)] - c(0.0, 1.25)).norm() < 1e-15);
        assert!((pair.plus[(0, 1)] - c(0.0, 0.75)).norm() < 1e-15);
        assert!((pair.minus[(0, 1)] - c(0.0, -0.75)).norm() < 1e-15);
        // 2×2 eigensolve of the plus member
        let mut ev = linalg::complex_eigenvalues(&pair.plus);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c(0.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn delta_pair_rejects_lower_half_plane() {
        assert!(matches!(delta_pair(c(1.0, -0.1)), Err(FamilyError::NotInLambda(_))));
        assert!(matches!(delta_pair(c(1.0, 0.0)), Err(FamilyError::NotInLambda(_))));
    }

    #[test]
    fn delta_members_satisfy_defining_constraints() {
        for zbar in [c(0.0, 1.0), c(0.3, 0.7), c(-2.0, 0.1), c(1.5, 3.0)] {
            let pair = delta_pair(zbar).unwrap();
            let sz = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
            for m in [&pair.plus, &pair.minus] {
                let sq = (&sz * m) * (&sz * m);
                assert!(cmax_abs(&(sq + CMat::identity(2, 2))) < 1e-10);
                let shifted = m + CMat::identity(2, 2) * zbar.inv();
                assert!(shifted.determinant().norm() < 1e-10);
                assert!(linalg::min_sym_eigenvalue(&linalg::imag_part(m)) > 0.0);
            }
        }
    }

    #[test]
    fn one_mode_family_is_the_scalar() {
        let zbar = c(0.4, 1.7);
        let z = build_graph(&FamilyParams::canonical(1, zbar).unwrap()).unwrap();
        assert!((z.z()[(0, 0)] - zbar).norm() < 1e-15);
    }

    #[test]
    fn two_mode_family_is_diagonal() {
        let z = build_graph(&FamilyParams::canonical(2, c(0.0, 2.0)).unwrap()).unwrap().z();
        assert!((z[(0, 0)] - c(0.0, 2.0)).norm() < 1e-15);
        assert!((z[(1, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!(z[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn bad_sign_count_is_rejected() {
        let err = FamilyParams::new(c(0.0, 1.0), vec![0, 1, 2], RMat::identity(2, 2), vec![]).unwrap_err();
        assert!(matches!(err, FamilyError::BadSignCount { expected: 1, got: 0, .. }));
    }

    #[test]
    fn params_reject_bad_permutation_and_non_orthogonal() {
        let err = FamilyParams::new(c(0.0, 1.0), vec![0, 0, 2], RMat::identity(2, 2), vec![BlockSign::Plus]);
        assert!(matches!(err, Err(FamilyError::BadPermutation(_))));
        let err = FamilyParams::new(c(0.0, 1.0), vec![0, 1, 2], RMat::identity(2, 2) * 2.0, vec![BlockSign::Plus]);
        assert!(matches!(err, Err(FamilyError::NotOrthogonal(_))));
    }

    #[test]
    fn joint_diag_of_identity() {
        let (q, d) = joint_diag_commuting(&RMat::zeros(3, 3), &RMat::identity(3, 3), 1e-10).unwrap();
        assert!(max_abs(&(q - RMat::identity(3, 3))) < 1e-14);
        assert!(d.iter().all(|v| (v - c(0.0, 1.0)).norm() < 1e-14));
    }

    #[test]
    fn joint_diag_recovers_constructed_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..8 {
            let q0 = linalg::random_orthogonal(n, &mut rng);
            // repeated entries exercise the degenerate-cluster path
            let dx: Vec<f64> = (0..n).map(|k| (k % 3) as f64 - 1.0).collect();
            let dy: Vec<f64> = (0..n).map(|k| 1.0 + (k % 2) as f64).collect();
            let xb = &q0 * RMat::from_diagonal(&nalgebra::DVector::from_vec(dx)) * q0.transpose();
            let yb = &q0 * RMat::from_diagonal(&nalgebra::DVector::from_vec(dy)) * q0.transpose();
            let (q, d) = joint_diag_commuting(&xb, &yb, 1e-9).unwrap();
            assert!(linalg::orthogonality_defect(&q) < 1e-10);
            let back = linalg::to_complex(&q).transpose() * linalg::complexify(&xb, &yb) * linalg::to_complex(&q);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { d[i] } else { c(0.0, 0.0) };
                    assert!((back[(i, j)] - want).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn joint_diag_rejects_non_commuting() {
        let xb = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let yb = RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(matches!(joint_diag_commuting(&xb, &yb, 1e-9), Err(Rejection::NonCommutingParts { .. })));
    }

    #[test]
    fn vacuum_is_a_member_with_smallest_ell() {
        let cert = membership(&GraphMatrix::vacuum(4), 1e-8).unwrap();
        assert_eq!(cert.ell, 0);
        assert_eq!(cert.decoupled_modes, vec![0, 1, 2, 3]);
        assert!((cert.zbar - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn equal_diagonal_pair_has_wrong_spectrum() {
        let z = GraphMatrix::new(RMat::zeros(2, 2), RMat::identity(2, 2) * 2.0).unwrap();
        assert!(matches!(membership(&z, 1e-8), Err(Rejection::WrongSpectrum(_))));
    }

    #[test]
    fn coupled_pair_has_no_decoupled_mode() {
        let y = RMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0]);
        let z = GraphMatrix::new(RMat::zeros(2, 2), y).unwrap();
        assert!(matches!(membership(&z, 1e-8), Err(Rejection::NoDecoupledMode { .. })));
    }

    #[test]
    fn later_decoupled_mode_is_tried_when_first_fails() {
        // mode 0 with z̄ = i/2 leaves {2i, 2i}, which fails; mode 1 with z̄ = 2i leaves {i/2, 2i}
        let y = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 2.0]));
        let z = GraphMatrix::new(RMat::zeros(3, 3), y).unwrap();
        let cert = membership(&z, 1e-8).unwrap();
        assert_eq!(cert.ell, 1);
        assert_eq!(cert.decoupled_modes, vec![0, 1, 2]);
    }

    #[test]
    fn certificate_rebuilds_random_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=9 {
            for _ in 0..4 {
                let params = FamilyParams::random(n, &mut rng);
                let z = build_graph(&params).unwrap();
                let cert = membership(&z, 1e-8).unwrap();
                assert!(cert.decoupled_modes.contains(&params.ell()));
                if cert.decoupled_modes.len() == 1 {
                    assert_eq!(cert.ell, params.ell());
                }
                let at = certify_mode(&z, params.ell(), 1e-8).unwrap();
                assert!((at.zbar - params.zbar).norm() < 1e-9);
                let rebuilt = build_graph(&cert.family_params().unwrap()).unwrap();
                assert!(cmax_abs(&(rebuilt.z() - z.z())) < 1e-8, "n = {n}");
            }
        }
    }
}
