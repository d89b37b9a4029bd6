//! Pure Gaussian states as graph matrices `Z = X + iY` and as covariance
//! matrices, with the conversions between them.
//!
//! Quadratures are ordered `(q₁ … q_N, p₁ … p_N)` everywhere. A pure
//! zero-mean state has covariance
//!
//! ```text
//! V = ½ [ Y⁻¹     Y⁻¹X        ]
//!       [ XY⁻¹    XY⁻¹X + Y   ]
//! ```

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::linalg::{self, complexify, max_abs, max_asymmetry, symmetrize};
use crate::{CMat, RMat};

/// Default tolerance for symmetry of raw input and, relative to `‖Y‖`, for
/// positive definiteness of `Y`.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-10;
/// Default tolerance on `|purity − 1|`.
pub const DEFAULT_PURITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input is not symmetric: max |M - Mᵀ| = {asymmetry:e} exceeds {tol:e}")]
    AsymmetricInput { asymmetry: f64, tol: f64 },
    #[error("Y is not positive definite: smallest eigenvalue {min_eigenvalue:e} <= {threshold:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },
    #[error("covariance matrix is not pure: {0}")]
    NotPure(String),
    #[error("q-q block of the covariance matrix is not invertible")]
    SingularBlock,
    #[error("covariance matrix is not positive definite")]
    NonPositive,
}

/// Graph matrix `Z = X + iY` of an `N`-mode pure Gaussian state, with `X`,
/// `Y` real symmetric and `Y` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrix {
    x: RMat,
    y: RMat,
}

impl GraphMatrix {
    /// Validates with [`DEFAULT_VALIDATION_TOL`].
    pub fn new(x: RMat, y: RMat) -> Result<Self, StateError> {
        validate_graph(&x, &y, DEFAULT_VALIDATION_TOL)
    }

    /// Splits a complex symmetric matrix into real and imaginary parts and
    /// validates them.
    pub fn from_complex(z: &CMat, tol: f64) -> Result<Self, StateError> {
        validate_graph(&linalg::real_part(z), &linalg::imag_part(z), tol)
    }

    /// The `N`-mode vacuum, `Z = iI`.
    pub fn vacuum(n_modes: usize) -> Self {
        Self { x: RMat::zeros(n_modes, n_modes), y: RMat::identity(n_modes, n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &RMat {
        &self.x
    }

    pub fn y(&self) -> &RMat {
        &self.y
    }

    pub fn z(&self) -> CMat {
        complexify(&self.x, &self.y)
    }

    /// `Y⁻¹`, which exists by construction.
    pub fn y_inverse(&self) -> RMat {
        linalg::spd_inverse(&self.y).expect("graph matrix invariant: Y is positive definite")
    }
}

/// Checks that `xraw` and `yraw` form a valid graph matrix and returns the
/// symmetrized result.
pub fn validate_graph(xraw: &RMat, yraw: &RMat, tol: f64) -> Result<GraphMatrix, StateError> {
    let n = xraw.nrows();
    if !xraw.is_square() || !yraw.is_square() || yraw.nrows() != n {
        return Err(StateError::ShapeMismatch(format!(
            "X is {}x{}, Y is {}x{}",
            xraw.nrows(),
            xraw.ncols(),
            yraw.nrows(),
            yraw.ncols()
        )));
    }
    if n == 0 {
        return Err(StateError::ShapeMismatch("graph matrix needs at least one mode".into()));
    }
    let asymmetry = max_asymmetry(xraw).max(max_asymmetry(yraw));
    if asymmetry > tol {
        return Err(StateError::AsymmetricInput { asymmetry, tol });
    }
    let x = symmetrize(xraw);
    let y = symmetrize(yraw);
    let eig = y.symmetric_eigenvalues();
    let min_eigenvalue = eig.min();
    let scale = eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = tol * scale;
    if !(min_eigenvalue > threshold) {
        return Err(StateError::NotPositiveDefinite { min_eigenvalue, threshold });
    }
    Ok(GraphMatrix { x, y })
}

/// Real symmetric `2N × 2N` second-moment matrix in `(q…, p…)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    v: RMat,
}

impl CovarianceMatrix {
    /// Wraps `v`, symmetrizing it. Fails if `v` is not square with even
    /// dimension or is visibly asymmetric.
    pub fn new(v: RMat) -> Result<Self, StateError> {
        if !v.is_square() || v.nrows() == 0 || !v.nrows().is_multiple_of(2) {
            return Err(StateError::ShapeMismatch(format!(
                "covariance must be 2N x 2N, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let asymmetry = max_asymmetry(&v);
        let tol = 1e-8 * max_abs(&v).max(1.0);
        if asymmetry > tol {
            return Err(StateError::AsymmetricInput { asymmetry, tol });
        }
        Ok(Self { v: symmetrize(&v) })
    }

    /// Caller guarantees symmetry up to rounding.
    pub(crate) fn from_symmetric(v: RMat) -> Self {
        Self { v: symmetrize(&v) }
    }

    /// `½ I₂N`.
    pub fn vacuum(n_modes: usize) -> Self {
        Self { v: RMat::identity(2 * n_modes, 2 * n_modes) * 0.5 }
    }

    pub fn n_modes(&self) -> usize {
        self.v.nrows() / 2
    }

    pub fn matrix(&self) -> &RMat {
        &self.v
    }

    pub fn into_matrix(self) -> RMat {
        self.v
    }

    pub fn qq(&self) -> RMat {
        let n = self.n_modes();
        self.v.view((0, 0), (n, n)).into_owned()
    }

    pub fn qp(&self) -> RMat {
        let n = self.n_modes();
        self.v.view((0, n), (n, n)).into_owned()
    }

    pub fn pp(&self) -> RMat {
        let n = self.n_modes();
        self.v.view((n, n), (n, n)).into_owned()
    }
}

/// The symplectic form `Σ = [[0, I], [−I, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix(&self) -> RMat {
        let n = self.n_modes;
        let mut s = RMat::zeros(2 * n, 2 * n);
        for j in 0..n {
            s[(j, n + j)] = 1.0;
            s[(n + j, j)] = -1.0;
        }
        s
    }
}

/// Covariance matrix of the pure state with graph matrix `z`.
pub fn cov_from_graph(z: &GraphMatrix) -> CovarianceMatrix {
    let n = z.n_modes();
    let x = z.x();
    let y_inv = z.y_inverse();
    let y_inv_x = &y_inv * x;
    let pp = symmetrize(&(x * &y_inv_x + z.y()));
    let mut v = RMat::zeros(2 * n, 2 * n);
    v.view_mut((0, 0), (n, n)).copy_from(&y_inv);
    v.view_mut((0, n), (n, n)).copy_from(&y_inv_x);
    v.view_mut((n, 0), (n, n)).copy_from(&y_inv_x.transpose());
    v.view_mut((n, n), (n, n)).copy_from(&pp);
    CovarianceMatrix::from_symmetric(v * 0.5)
}

/// Recovers the graph matrix of a pure covariance matrix.
pub fn graph_from_cov(v: &CovarianceMatrix, tol: f64) -> Result<GraphMatrix, StateError> {
    let qq2 = v.qq() * 2.0;
    let y = linalg::spd_inverse(&qq2).ok_or(StateError::SingularBlock)?;
    let x = symmetrize(&(&y * (v.qp() * 2.0)));
    let z = validate_graph(&x, &y, DEFAULT_VALIDATION_TOL)?;

    let scale = max_abs(v.matrix()).max(1.0);
    let expected_pp = symmetrize(&(&x * z.y_inverse() * &x + &y)) * 0.5;
    let block_err = max_abs(&(v.pp() - expected_pp));
    if block_err > tol * scale {
        return Err(StateError::NotPure(format!("p-p block mismatch {block_err:e}")));
    }
    let p = purity(v).map_err(|_| StateError::NotPure("covariance not positive definite".into()))?;
    if (p - 1.0).abs() > tol {
        return Err(StateError::NotPure(format!("purity {p}")));
    }
    Ok(z)
}

/// `1 / √(2^{2N} det V)`, evaluated through the log-determinant.
pub fn purity(v: &CovarianceMatrix) -> Result<f64, StateError> {
    let log_det = linalg::log_det_spd(v.matrix()).ok_or(StateError::NonPositive)?;
    let n = v.n_modes() as f64;
    Ok((-0.5 * (2.0 * n * LN_2 + log_det)).exp())
}

/// `|purity(V) − 1| ≤ tol`; non-positive matrices are not pure.
pub fn is_pure(v: &CovarianceMatrix, tol: f64) -> bool {
    purity(v).map(|p| (p - 1.0).abs() <= tol).unwrap_or(false)
}
