#![allow(dead_code)]

use gaussprep::linalg::{self, random_orthogonal};
use gaussprep::state_family::{block_count, Parity};
use gaussprep::{CMat, Complex64, Gains, RMat};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn cgauss<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// `I + 0.3·G`, which is comfortably nonsingular for the sizes used here.
pub fn well_conditioned<R: Rng>(n: usize, rng: &mut R) -> CMat {
    CMat::identity(n, n) + cgauss(n, n, rng) * Complex64::new(0.3 / (n as f64).sqrt(), 0.0)
}

/// `S diag(eigs) S⁻¹` with a well-conditioned `S`.
pub fn with_spectrum<R: Rng>(eigs: &[Complex64], rng: &mut R) -> CMat {
    let n = eigs.len();
    let s = well_conditioned(n, rng);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_row_slice(eigs));
    &s * d * s.try_inverse().expect("well conditioned")
}

/// `k` eigenvalues in the unit box, pairwise at least `sep` apart and at
/// least `sep` from every entry of `avoid`.
pub fn separated_eigs<R: Rng>(k: usize, sep: f64, avoid: &[Complex64], rng: &mut R) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(k);
    while out.len() < k {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if out.iter().chain(avoid).all(|w| (z - w).norm() >= sep) {
            out.push(z);
        }
    }
    out
}

/// A pair known to be controllable (generic spectrum, generic input) or
/// uncontrollable (Kalman form hidden behind a similarity).
pub fn labelled_pair<R: Rng>(n: usize, controllable: bool, rng: &mut R) -> (CMat, CMat) {
    if controllable || n < 2 {
        let eigs = separated_eigs(n, 0.3, &[], rng);
        let a = with_spectrum(&eigs, rng);
        let mut b = cgauss(n, 1, rng);
        if !controllable {
            b.fill(Complex64::new(0.0, 0.0));
        }
        return (a, b);
    }
    let k = rng.random_range(1..n);
    let mut kalman = cgauss(n, n, rng) * Complex64::new(0.5, 0.0);
    for i in k..n {
        for j in 0..k {
            kalman[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    let mut b = CMat::zeros(n, 1);
    for i in 0..k {
        b[(i, 0)] = Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
    }
    let t = well_conditioned(n, rng);
    let t_inv = t.clone().try_inverse().expect("well conditioned");
    (&t * kalman * &t_inv, &t * b)
}

/// Random valid gains: `|τ̄| ∈ [0.5, 2]`, distinct `|r|` spaced by at least
/// 0.5, `|τ_p| ∈ [0.5, 2]`.
pub fn random_gains<R: Rng>(n_modes: usize, rng: &mut R) -> Gains {
    let blocks = block_count(n_modes);
    let n_taus = match Parity::of(n_modes) {
        Parity::Odd => blocks,
        Parity::Even => blocks + 1,
    };
    let sign = |rng: &mut R| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let taus = (0..n_taus).map(|_| sign(rng) * rng.random_range(0.5..2.0)).collect();
    let rs = (0..blocks).map(|j| sign(rng) * (1.0 + j as f64 + rng.random_range(0.0..0.5))).collect();
    let tau_p = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU));
    Gains { taus, rs, tau_p }
}

/// Random real orthogonal similarity applied to a real matrix.
pub fn rotate<R: Rng>(m: &RMat, rng: &mut R) -> RMat {
    let q = random_orthogonal(m.nrows(), rng);
    q.transpose() * m * q
}

pub fn cmax(m: &CMat) -> f64 {
    linalg::cmax_abs(m)
}
