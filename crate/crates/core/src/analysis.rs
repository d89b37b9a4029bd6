//! Entanglement and distance diagnostics on covariance matrices.

use thiserror::Error;

use crate::gaussian_states::{CovarianceMatrix, SymplecticForm};
use crate::linalg;
use crate::RMat;

/// Log-negativity above which a pair counts as entangled.
pub const ENTANGLED_THRESHOLD: f64 = 1e-9;
/// Relative slack on the uncertainty bound `ν ≥ ½`.
pub const DEFAULT_PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("bad mode indices {indices:?} for {n_modes} modes")]
    BadIndices { indices: Vec<usize>, n_modes: usize },
    #[error("expected a two-mode covariance, got {0} modes")]
    NotTwoMode(usize),
    #[error("covariance is unphysical: smallest symplectic eigenvalue {0}")]
    Unphysical(f64),
}

/// Marginal covariance of the listed modes (0-based), keeping the
/// `(q…, p…)` ordering and the order of `modes`.
pub fn reduce(v: &CovarianceMatrix, modes: &[usize]) -> Result<CovarianceMatrix, AnalysisError> {
    let n = v.n_modes();
    let mut seen = vec![false; n];
    let valid = !modes.is_empty()
        && modes.iter().all(|&m| m < n && !std::mem::replace(&mut seen[m], true));
    if !valid {
        return Err(AnalysisError::BadIndices { indices: modes.to_vec(), n_modes: n });
    }
    let idx: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|&m| m + n)).collect();
    let k = idx.len();
    let m = v.matrix();
    Ok(CovarianceMatrix::from_symmetric(RMat::from_fn(k, k, |a, b| m[(idx[a], idx[b])])))
}

/// Symplectic eigenvalues, ascending. They are the moduli of the eigenvalues
/// of `ΣV`, which come in pairs `±iν`.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> Vec<f64> {
    let n = v.n_modes();
    let sigma = SymplecticForm::new(n).matrix();
    let mut mags: Vec<f64> = linalg::real_matrix_eigenvalues(&(sigma * v.matrix())).iter().map(|l| l.norm()).collect();
    mags.sort_by(f64::total_cmp);
    // each value appears twice
    (0..n).map(|j| 0.5 * (mags[2 * j] + mags[2 * j + 1])).collect()
}

/// Logarithmic negativity `max(0, −ln 2ν̃₋)` of a two-mode state, with `ν̃₋`
/// the smallest symplectic eigenvalue after transposing the second mode.
pub fn log_negativity_2mode(v2: &CovarianceMatrix, tol: f64) -> Result<f64, AnalysisError> {
    if v2.n_modes() != 2 {
        return Err(AnalysisError::NotTwoMode(v2.n_modes()));
    }
    let nu_min = symplectic_eigenvalues(v2)[0];
    if nu_min < 0.5 * (1.0 - tol) {
        return Err(AnalysisError::Unphysical(nu_min));
    }
    let mut pt = v2.matrix().clone();
    // p of the second mode sits at index 3 in (q1, q2, p1, p2)
    for j in 0..4 {
        if j != 3 {
            pt[(3, j)] = -pt[(3, j)];
            pt[(j, 3)] = -pt[(j, 3)];
        }
    }
    let nu_pt = symplectic_eigenvalues(&CovarianceMatrix::from_symmetric(pt))[0];
    Ok((-(2.0 * nu_pt).ln()).max(0.0))
}

/// Pairwise log-negativities of all two-mode marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementMap {
    pub n_modes: usize,
    /// Symmetric, zero on the diagonal.
    pub pair_values: RMat,
}

impl EntanglementMap {
    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.pair_values[(j, k)]
    }

    /// Pairs `(j, k, E)` with `j < k` and `E > threshold`.
    pub fn entangled_pairs(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let n = self.n_modes;
        (0..n)
            .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
            .map(|(j, k)| (j, k, self.pair_values[(j, k)]))
            .filter(|&(_, _, e)| e > threshold)
            .collect()
    }

    /// Largest value involving mode `j`.
    pub fn row_max(&self, j: usize) -> f64 {
        self.pair_values.row(j).iter().copied().fold(0.0, f64::max)
    }
}

pub fn entanglement_map(v: &CovarianceMatrix, tol: f64) -> Result<EntanglementMap, AnalysisError> {
    let n = v.n_modes();
    let mut pair_values = RMat::zeros(n, n);
    for j in 0..n {
        for k in j + 1..n {
            let e = log_negativity_2mode(&reduce(v, &[j, k])?, tol)?;
            pair_values[(j, k)] = e;
            pair_values[(k, j)] = e;
        }
    }
    Ok(EntanglementMap { n_modes: n, pair_values })
}

/// `‖V₁ − V₂‖_F`. Panics on a size mismatch.
pub fn frobenius_distance(v1: &CovarianceMatrix, v2: &CovarianceMatrix) -> f64 {
    assert_eq!(v1.matrix().shape(), v2.matrix().shape(), "covariance sizes differ");
    (v1.matrix() - v2.matrix()).norm()
}
