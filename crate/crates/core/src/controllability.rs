//! Controllability of a complex pair `(A, B)` by two independent tests: the
//! rank of the Krylov matrix `[B, AB, …, Aⁿ⁻¹B]` and the PBH criterion that
//! `[A − λI, B]` has full row rank at every eigenvalue `λ` of `A`.

use crate::linalg::{self, cmax_abs};
use crate::CMat;

/// Default relative threshold for both tests.
pub const DEFAULT_CONTROLLABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PairControllability {
    pub dim: usize,
    pub krylov_rank: usize,
    /// Singular values of the column-normalized Krylov matrix, descending.
    pub krylov_singular_values: Vec<f64>,
    /// Smallest, over eigenvalues `λ` of `A`, of `σ_min([A − λI, B])`.
    pub pbh_min_sv: f64,
    /// Scale `max(‖A‖₂, ‖B‖₂)` the PBH threshold is relative to.
    pub pbh_scale: f64,
    pub krylov_controllable: bool,
    pub pbh_controllable: bool,
    pub tol: f64,
}

impl PairControllability {
    pub fn agree(&self) -> bool {
        self.krylov_controllable == self.pbh_controllable
    }

    /// The common verdict, or `None` when the two tests disagree.
    pub fn verdict(&self) -> Option<bool> {
        self.agree().then_some(self.krylov_controllable)
    }
}

/// Krylov matrix `[B, AB, …, Aⁿ⁻¹B]` built from `A/‖A‖` with every column
/// normalized. Neither rescaling changes the rank.
pub fn krylov_matrix(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let k = b.ncols();
    let a_scale = cmax_abs(a);
    let a_n = if a_scale > 0.0 { a / num_complex::Complex64::from(a_scale) } else { a.clone() };
    let mut out = CMat::zeros(n, n * k);
    let mut block = b.clone();
    for step in 0..n {
        for j in 0..k {
            let mut col = block.column(j).into_owned();
            let norm = col.norm();
            if norm > 0.0 {
                col /= num_complex::Complex64::from(norm);
            }
            out.set_column(step * k + j, &col);
            block.set_column(j, &col);
        }
        block = &a_n * &block;
    }
    out
}

pub fn pair_controllability(a: &CMat, b: &CMat, tol: f64) -> PairControllability {
    assert!(a.is_square(), "A must be square");
    assert_eq!(a.nrows(), b.nrows(), "A and B must have the same number of rows");
    let n = a.nrows();

    let krylov_singular_values = linalg::singular_values(&krylov_matrix(a, b));
    let smax = krylov_singular_values.first().copied().unwrap_or(0.0);
    let krylov_rank = krylov_singular_values.iter().filter(|&&s| s > tol * smax && smax > 0.0).count();

    let pbh_scale = linalg::singular_values(a)
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(linalg::singular_values(b).first().copied().unwrap_or(0.0));
    let mut pbh_min_sv = f64::INFINITY;
    for lambda in linalg::complex_eigenvalues(a) {
        let mut m = CMat::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n)).copy_from(&(a - CMat::identity(n, n) * lambda));
        m.view_mut((0, n), (n, b.ncols())).copy_from(b);
        let sv = linalg::singular_values(&m);
        pbh_min_sv = pbh_min_sv.min(sv[n - 1]);
    }
    let pbh_controllable = pbh_scale > 0.0 && pbh_min_sv > tol * pbh_scale;

    PairControllability {
        dim: n,
        krylov_rank,
        krylov_singular_values,
        pbh_min_sv,
        pbh_scale,
        krylov_controllable: krylov_rank == n,
        pbh_controllable,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use crate::RMat;
    use num_complex::Complex64;

    #[test]
    fn shift_register_is_controllable() {
        // companion-like chain: B excites the first state, A shifts down
        let a = to_complex(&RMat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let b = to_complex(&RMat::from_row_slice(3, 1, &[1.0, 0.0, 0.0]));
        let rep = pair_controllability(&a, &b, 1e-8);
        assert_eq!(rep.krylov_rank, 3);
        assert_eq!(rep.verdict(), Some(true));
    }

    #[test]
    fn zero_input_is_not_controllable() {
        let a = to_complex(&RMat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let rep = pair_controllability(&a, &CMat::zeros(2, 1), 1e-8);
        assert_eq!(rep.krylov_rank, 0);
        assert_eq!(rep.verdict(), Some(false));
    }

    #[test]
    fn repeated_eigenvalue_with_single_input_is_not_controllable() {
        let a = CMat::identity(2, 2) * Complex64::new(0.0, 2.0);
        let b = to_complex(&RMat::from_row_slice(2, 1, &[1.0, 1.0]));
        let rep = pair_controllability(&a, &b, 1e-8);
        assert_eq!(rep.krylov_rank, 1);
        assert_eq!(rep.verdict(), Some(false));
    }
}
