//! Realizations `(R, Γ, P, G, C)` that prepare a family member.
//!
//! For a graph matrix `Z = X + iY`, any real symmetric `R`, real
//! antisymmetric `Γ` and complex `P` give a Hamiltonian
//!
//! ```text
//! G = [ XRX + YRY − ΓY⁻¹X − XY⁻¹Γᵀ    −XR + ΓY⁻¹ ]
//!     [ −RX + Y⁻¹Γᵀ                   R          ]
//! ```
//!
//! and coupling `C = Pᵀ[−Z  I]` whose dynamics has `Z` as its unique steady
//! state exactly when `(Q, P)` is controllable with `Q = −iRY + Y⁻¹Γ`. The
//! recipe here chooses `R` with `ZRZ = −R` and `Γ = XRY`, which makes `G`
//! passive (`diag(R, R)`) and puts `P` on a single mode.

use num_complex::Complex64;
use thiserror::Error;

use crate::controllability::{pair_controllability, PairControllability, DEFAULT_CONTROLLABILITY_TOL};
use crate::gaussian_states::GraphMatrix;
use crate::linalg::{self, antisymmetrize, cmax_abs, max_abs, symmetrize};
use crate::state_family::{
    self, block_count, BlockSign, FamilyError, FamilyParams, MembershipCertificate, Parity, Rejection,
    DEFAULT_MEMBERSHIP_TOL,
};
use crate::{CMat, RMat};

/// Default relative tolerance for the structural checks in [`synthesize`].
pub const DEFAULT_SYNTHESIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("graph matrix is not in the preparable family: {0}")]
    Rejected(#[from] Rejection),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("invalid gains: {0}")]
    BadGains(String),
    #[error("family parameters do not reproduce the graph matrix (max deviation {0:e})")]
    NotCertified(f64),
    #[error("controllability tests disagree: Krylov rank {krylov_rank} of {dim}, PBH min singular value {pbh_min_sv:e}")]
    TestDisagreement { krylov_rank: usize, dim: usize, pbh_min_sv: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("realization violates {what} (residual {residual:e})")]
    ConstraintViolated { what: &'static str, residual: f64 },
}

/// Free gains of the recipe.
///
/// For odd `N` there are `(N−1)/2` block gains `τ̄ⱼ` and as many `rⱼ`. For
/// even `N`, `taus[0]` is the scalar-block gain followed by `(N−2)/2` block
/// gains, and `rs` holds `(N−2)/2` values (the scalar block has `r = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub taus: Vec<f64>,
    pub rs: Vec<f64>,
    pub tau_p: Complex64,
}

impl Gains {
    /// `τ̄ⱼ = 1`, `rⱼ = j`, `τ_p = 1`.
    pub fn default_for(n_modes: usize) -> Self {
        let blocks = block_count(n_modes);
        let (n_taus, first_r) = match Parity::of(n_modes) {
            Parity::Odd => (blocks, 1),
            Parity::Even => (blocks + 1, 2),
        };
        Self {
            taus: vec![1.0; n_taus],
            rs: (0..blocks).map(|j| (first_r + j) as f64).collect(),
            tau_p: Complex64::new(1.0, 0.0),
        }
    }

    pub fn validate(&self, n_modes: usize) -> Result<(), SynthesisError> {
        let blocks = block_count(n_modes);
        let n_taus = match Parity::of(n_modes) {
            Parity::Odd => blocks,
            Parity::Even => blocks + 1,
        };
        if self.taus.len() != n_taus {
            return Err(SynthesisError::BadGains(format!("expected {n_taus} taus, got {}", self.taus.len())));
        }
        if self.rs.len() != blocks {
            return Err(SynthesisError::BadGains(format!("expected {blocks} rs, got {}", self.rs.len())));
        }
        if self.taus.iter().any(|t| *t == 0.0 || !t.is_finite()) {
            return Err(SynthesisError::BadGains("every tau must be finite and nonzero".into()));
        }
        if self.rs.iter().any(|r| *r == 0.0 || !r.is_finite()) {
            return Err(SynthesisError::BadGains("every r must be finite and nonzero".into()));
        }
        for (j, a) in self.rs.iter().enumerate() {
            if self.rs[j + 1..].iter().any(|b| a.abs() == b.abs()) {
                return Err(SynthesisError::BadGains(format!("|r| = {} appears twice", a.abs())));
            }
        }
        if self.tau_p == Complex64::new(0.0, 0.0) || !self.tau_p.is_finite() {
            return Err(SynthesisError::BadGains("tau_p must be finite and nonzero".into()));
        }
        Ok(())
    }
}

/// Controllability of `(Q, P)` with `Q = −iRY + Y⁻¹Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    pub q_ctrl: CMat,
    pub rank: usize,
    pub pbh_min_sv: f64,
    pub controllable: bool,
    pub tests: PairControllability,
}

/// A synthesized system together with the parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRealization {
    pub n_modes: usize,
    pub r: RMat,
    pub gamma: RMat,
    /// `N × 1`.
    pub p: CMat,
    pub g: RMat,
    /// `1 × 2N`.
    pub c: CMat,
    pub ell: usize,
    pub gains: Gains,
    pub params: FamilyParams,
    pub controllability: ControllabilityReport,
}

/// Recipe output before `G` and `C` are formed.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeMatrices {
    pub r: RMat,
    pub gamma: RMat,
    pub p: CMat,
    /// `R̄₂₁`, stacked per block.
    pub r21: nalgebra::DVector<f64>,
    /// `R̄₂₂` diagonal.
    pub r22: nalgebra::DVector<f64>,
}

/// Builds `(R, Γ, P)` for the member `params`, which must reproduce `z`
/// within `tol` (relative to `max(1, max|Z|)`).
pub fn recipe(params: &FamilyParams, z: &GraphMatrix, gains: &Gains, tol: f64) -> Result<RecipeMatrices, SynthesisError> {
    params.validate(state_family::DEFAULT_ORTHOGONALITY_TOL)?;
    let n = params.n_modes;
    if z.n_modes() != n {
        return Err(SynthesisError::ShapeMismatch(format!("{} modes in Z, {n} in params", z.n_modes())));
    }
    gains.validate(n)?;
    let zc = z.z();
    let scale = cmax_abs(&zc).max(1.0);
    let deviation = cmax_abs(&(state_family::build_graph(params)?.z() - &zc));
    if deviation > tol * scale {
        return Err(SynthesisError::NotCertified(deviation));
    }

    let m = n - 1;
    let mut r21 = nalgebra::DVector::zeros(m);
    let mut r22 = nalgebra::DVector::zeros(m);
    let mut offset = 0;
    let mut tau_iter = gains.taus.iter();
    if params.parity() == Parity::Even && m > 0 {
        r21[0] = *tau_iter.next().expect("validated");
        offset = 1;
    }
    for ((sign, tau), r) in params.block_signs.iter().zip(tau_iter).zip(&gains.rs) {
        // the +b member has −1/z̄ on [1, −1], the −b member on [1, 1]
        r21[offset] = *tau;
        r21[offset + 1] = match sign {
            BlockSign::Plus => -tau,
            BlockSign::Minus => *tau,
        };
        r22[offset] = *r;
        r22[offset + 1] = -r;
        offset += 2;
    }

    let q = &params.q_orth;
    let mut reduced = RMat::zeros(n, n);
    if m > 0 {
        let col = q.transpose() * &r21;
        reduced.view_mut((1, 0), (m, 1)).copy_from(&col);
        reduced.view_mut((0, 1), (1, m)).copy_from(&col.transpose());
        let block = symmetrize(&(q.transpose() * RMat::from_diagonal(&r22) * q));
        reduced.view_mut((1, 1), (m, m)).copy_from(&block);
    }
    let r = linalg::permute_congruence(&reduced, &params.perm);

    let xry = z.x() * &r * z.y();
    let defect = max_abs(&(&xry + xry.transpose()));
    if defect > tol * scale * scale * max_abs(&r).max(1.0) {
        return Err(SynthesisError::ConstraintViolated { what: "Γ = XRY antisymmetric", residual: defect });
    }
    let gamma = antisymmetrize(&xry);

    let mut p = CMat::zeros(n, 1);
    p[(params.ell(), 0)] = gains.tau_p;
    Ok(RecipeMatrices { r, gamma, p, r21, r22 })
}

/// Recipe for a certified graph matrix.
pub fn recipe_from_certificate(
    cert: &MembershipCertificate,
    z: &GraphMatrix,
    gains: &Gains,
    tol: f64,
) -> Result<RecipeMatrices, SynthesisError> {
    recipe(&cert.family_params()?, z, gains, tol)
}

/// General Hamiltonian matrix `G` for arbitrary `R = Rᵀ`, `Γ = −Γᵀ`.
pub fn hamiltonian_g(z: &GraphMatrix, r: &RMat, gamma: &RMat) -> Result<RMat, SynthesisError> {
    let n = z.n_modes();
    for (name, m) in [("R", r), ("Gamma", gamma)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(SynthesisError::ShapeMismatch(format!("{name} must be {n}x{n}")));
        }
    }
    let x = z.x();
    let y = z.y();
    let y_inv = z.y_inverse();
    let g_yinv = gamma * &y_inv;
    let top_left = x * r * x + y * r * y - &g_yinv * x - x * &y_inv * gamma.transpose();
    let top_right = -(x * r) + &g_yinv;
    let mut g = RMat::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&top_left);
    g.view_mut((0, n), (n, n)).copy_from(&top_right);
    g.view_mut((n, 0), (n, n)).copy_from(&top_right.transpose());
    g.view_mut((n, n), (n, n)).copy_from(r);
    Ok(symmetrize(&g))
}

/// `C = Pᵀ[−Z  I]`, of size `K × 2N`.
pub fn coupling_c(z: &GraphMatrix, p: &CMat) -> Result<CMat, SynthesisError> {
    let n = z.n_modes();
    if p.nrows() != n {
        return Err(SynthesisError::ShapeMismatch(format!("P must have {n} rows")));
    }
    let mut block = CMat::zeros(n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-z.z()));
    block.view_mut((0, n), (n, n)).copy_from(&CMat::identity(n, n));
    Ok(p.transpose() * block)
}

/// `Q = −iRY + Y⁻¹Γ`.
pub fn q_ctrl(z: &GraphMatrix, r: &RMat, gamma: &RMat) -> CMat {
    let ry = linalg::to_complex(&(r * z.y()));
    ry * Complex64::new(0.0, -1.0) + linalg::to_complex(&(z.y_inverse() * gamma))
}

/// Both controllability tests on `(Q, P)`. Fails if they disagree.
pub fn controllability(
    z: &GraphMatrix,
    r: &RMat,
    gamma: &RMat,
    p: &CMat,
    tol: f64,
) -> Result<ControllabilityReport, SynthesisError> {
    let n = z.n_modes();
    if r.shape() != (n, n) || gamma.shape() != (n, n) || p.nrows() != n {
        return Err(SynthesisError::ShapeMismatch("R, Gamma, P must match Z".into()));
    }
    let q = q_ctrl(z, r, gamma);
    let tests = pair_controllability(&q, p, tol);
    match tests.verdict() {
        Some(controllable) => Ok(ControllabilityReport {
            q_ctrl: q,
            rank: tests.krylov_rank,
            pbh_min_sv: tests.pbh_min_sv,
            controllable,
            tests,
        }),
        None => Err(SynthesisError::TestDisagreement {
            krylov_rank: tests.krylov_rank,
            dim: n,
            pbh_min_sv: tests.pbh_min_sv,
        }),
    }
}

/// `G = diag(R₀, R₀)`: equal q-q and p-p blocks, no q-p block.
pub fn is_passive(g: &RMat, tol: f64) -> bool {
    if !g.is_square() || !g.nrows().is_multiple_of(2) {
        return false;
    }
    let n = g.nrows() / 2;
    let qq = g.view((0, 0), (n, n));
    let pp = g.view((n, n), (n, n));
    let qp = g.view((0, n), (n, n));
    max_abs(&(qq - pp)) <= tol && max_abs(&qp.into_owned()) <= tol
}

/// The mode `ℓ` if `C` is a single row supported only on `q_ℓ` and `p_ℓ`.
pub fn is_local_single(c: &CMat, tol: f64) -> Option<usize> {
    if c.nrows() != 1 || !c.ncols().is_multiple_of(2) {
        return None;
    }
    let n = c.ncols() / 2;
    let mut modes = (0..2 * n).filter(|&k| c[(0, k)].norm() > tol).map(|k| k % n);
    let first = modes.next()?;
    modes.all(|m| m == first).then_some(first)
}

/// Certifies `z`, applies the recipe and checks every structural property
/// of the result.
pub fn synthesize(z: &GraphMatrix, gains: &Gains, tol: f64) -> Result<SystemRealization, SynthesisError> {
    let cert = state_family::membership(z, DEFAULT_MEMBERSHIP_TOL)?;
    synthesize_with_params(z, &cert.family_params()?, gains, tol)
}

/// Like [`synthesize`] but with the family parameters given explicitly.
pub fn synthesize_with_params(
    z: &GraphMatrix,
    params: &FamilyParams,
    gains: &Gains,
    tol: f64,
) -> Result<SystemRealization, SynthesisError> {
    let n = z.n_modes();
    let recipe = recipe(params, z, gains, DEFAULT_MEMBERSHIP_TOL.max(tol))?;
    let RecipeMatrices { r, gamma, p, .. } = recipe;

    let zc = z.z();
    let zscale = cmax_abs(&zc).max(1.0);
    let rscale = max_abs(&r).max(1.0);
    let identity_tol = tol * zscale * zscale * rscale;

    let rc = linalg::to_complex(&r);
    check("ZRZ = -R", cmax_abs(&(&zc * &rc * &zc + &rc)), identity_tol)?;
    let (x, y) = (z.x(), z.y());
    check("YRY - XRX = R", max_abs(&(y * &r * y - x * &r * x - &r)), identity_tol)?;
    check("XRY + YRX = 0", max_abs(&(x * &r * y + y * &r * x)), identity_tol)?;

    let g = hamiltonian_g(z, &r, &gamma)?;
    let mut diag_rr = RMat::zeros(2 * n, 2 * n);
    diag_rr.view_mut((0, 0), (n, n)).copy_from(&r);
    diag_rr.view_mut((n, n), (n, n)).copy_from(&r);
    check("G = diag(R, R)", max_abs(&(&g - &diag_rr)), identity_tol)?;
    if !is_passive(&g, identity_tol) {
        return Err(SynthesisError::ConstraintViolated { what: "passive Hamiltonian", residual: max_abs(&(&g - &diag_rr)) });
    }

    let c = coupling_c(z, &p)?;
    let ell = params.ell();
    if is_local_single(&c, tol * zscale * gains.tau_p.norm()) != Some(ell) {
        return Err(SynthesisError::ConstraintViolated { what: "single local coupling", residual: f64::NAN });
    }

    let report = controllability(z, &r, &gamma, &p, DEFAULT_CONTROLLABILITY_TOL)?;
    let minus_rz = -(&rc * &zc);
    check("Q = -RZ", cmax_abs(&(&report.q_ctrl - minus_rz)), identity_tol)?;
    if !report.controllable {
        return Err(SynthesisError::ConstraintViolated { what: "controllability of (Q, P)", residual: report.pbh_min_sv });
    }

    Ok(SystemRealization {
        n_modes: n,
        r,
        gamma,
        p,
        g,
        c,
        ell,
        gains: gains.clone(),
        params: params.clone(),
        controllability: report,
    })
}

/// Five-mode chain: `z̄ = i·e^{2α}` with parameters and gains chosen so the
/// realization is the nearest-neighbour chain
///
/// ```text
/// R = [ -1  2  0  0  0 ]
///     [  2 -1  2  0  0 ]
///     [  0  2  0  2  0 ]
///     [  0  0  2  1  2 ]
///     [  0  0  0  2  1 ]
/// ```
///
/// coupled to a reservoir through `L = cosh(α)a₃ + sinh(α)a₃*` on the
/// central mode. Modes `(1, 5)` and `(2, 4)` end up two-mode squeezed.
pub fn five_mode_chain(alpha: f64) -> (FamilyParams, Gains) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let q = RMat::from_row_slice(4, 4, &[
        -h, 0.0, -h, 0.0,
        0.0, -h, 0.0, h,
        0.0, h, 0.0, h,
        -h, 0.0, h, 0.0,
    ]);
    let params = FamilyParams {
        n_modes: 5,
        zbar: Complex64::new(0.0, (2.0 * alpha).exp()),
        perm: vec![2, 0, 4, 1, 3],
        q_orth: q,
        block_signs: vec![BlockSign::Plus, BlockSign::Minus],
    };
    let sq2 = std::f64::consts::SQRT_2;
    let gains = Gains {
        taus: vec![-sq2, sq2],
        rs: vec![1.0, 3.0],
        tau_p: Complex64::new(0.0, (alpha.cosh() - alpha.sinh()) / sq2),
    };
    (params, gains)
}

fn check(what: &'static str, residual: f64, tol: f64) -> Result<(), SynthesisError> {
    if residual > tol {
        Err(SynthesisError::ConstraintViolated { what, residual })
    } else {
        Ok(())
    }
}
