//! Moment dynamics of a linear quantum system:
//!
//! ```text
//! d⟨x⟩/dt = A⟨x⟩,        dV/dt = AV + VAᵀ + D,
//! A = Σ(G + Im(C†C)),    D = Σ Re(C†C) Σᵀ.
//! ```

use nalgebra::DVector;
use thiserror::Error;

use crate::analysis::frobenius_distance;
use crate::gaussian_states::{purity, CovarianceMatrix, SymplecticForm};
use crate::linalg::{self, max_abs, symmetrize};
use crate::{CMat, RMat};

/// Margin below zero the spectral abscissa must clear.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-10;
/// Relative residual allowed after the Lyapunov solve.
pub const DEFAULT_LYAPUNOV_TOL: f64 = 1e-9;
/// Most negative covariance eigenvalue tolerated during integration.
pub const DEFAULT_NEGATIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("drift is not strictly stable (spectral abscissa {0:e})")]
    NotStable(f64),
    #[error("Lyapunov solve is ill conditioned (relative residual {0:e})")]
    IllConditioned(f64),
    #[error("integration diverged at t = {t}: covariance lost positivity; reduce dt")]
    StepTooLarge { t: f64 },
    #[error("invalid integration settings: {0}")]
    BadSettings(String),
    #[error("trajectory has no target distances")]
    NoTarget,
}

/// Drift `A` and diffusion `D` of the moment equations.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftDiffusion {
    pub a: RMat,
    pub d: RMat,
    /// Largest real part among the eigenvalues of `A`.
    pub spectral_abscissa: f64,
}

impl DriftDiffusion {
    /// Assembles `(A, D)` from the Hamiltonian matrix `G` and coupling `C`.
    pub fn assemble(g: &RMat, c: &CMat) -> Result<Self, DynamicsError> {
        if !g.is_square() || !g.nrows().is_multiple_of(2) || c.ncols() != g.nrows() {
            return Err(DynamicsError::ShapeMismatch(format!(
                "G is {}x{}, C is {}x{}",
                g.nrows(),
                g.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        let sigma = SymplecticForm::new(g.nrows() / 2).matrix();
        let cc = c.adjoint() * c;
        let a = &sigma * (g + linalg::imag_part(&cc));
        let d = symmetrize(&(&sigma * linalg::real_part(&cc) * sigma.transpose()));
        Ok(Self::from_parts(a, d))
    }

    pub fn from_parts(a: RMat, d: RMat) -> Self {
        let spectral_abscissa =
            linalg::real_matrix_eigenvalues(&a).iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        Self { a, d, spectral_abscissa }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_strictly_stable(&self) -> bool {
        is_strictly_stable(self, DEFAULT_STABILITY_MARGIN)
    }

    /// `10⁻³ / |spectral abscissa|`, halved until RK4 is stable on every
    /// decaying mode.
    pub fn default_dt(&self) -> f64 {
        stable_step(self, 1e-3 / self.spectral_abscissa.abs())
    }
}

pub fn is_strictly_stable(dd: &DriftDiffusion, margin: f64) -> bool {
    dd.spectral_abscissa < -margin
}

/// Solves `AV + VAᵀ + D = 0` as the linear system
/// `(I ⊗ A + A ⊗ I) vec(V) = −vec(D)`.
pub fn steady_state(dd: &DriftDiffusion) -> Result<CovarianceMatrix, DynamicsError> {
    if !dd.is_strictly_stable() {
        return Err(DynamicsError::NotStable(dd.spectral_abscissa));
    }
    let n = dd.dim();
    let id = RMat::identity(n, n);
    let op = linalg::kron(&id, &dd.a) + linalg::kron(&dd.a, &id);
    let rhs = -DVector::from_column_slice(dd.d.as_slice());
    let sol = op.lu().solve(&rhs).ok_or(DynamicsError::IllConditioned(f64::INFINITY))?;
    let v = symmetrize(&RMat::from_column_slice(n, n, sol.as_slice()));
    let residual = max_abs(&(&dd.a * &v + &v * dd.a.transpose() + &dd.d));
    let scale = (max_abs(&dd.a) * max_abs(&v)).max(max_abs(&dd.d)).max(f64::MIN_POSITIVE);
    if residual / scale > DEFAULT_LYAPUNOV_TOL {
        return Err(DynamicsError::IllConditioned(residual / scale));
    }
    Ok(CovarianceMatrix::from_symmetric(v))
}

/// Fixed-step integration settings. `stride` is the number of steps between
/// recorded samples; the initial and final states are always recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSettings {
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
}

impl IntegrationSettings {
    /// `t_final = horizon / |abscissa|` with the default step.
    pub fn for_system(dd: &DriftDiffusion, horizon: f64, samples: usize) -> Self {
        let t_final = horizon / dd.spectral_abscissa.abs();
        let dt = dd.default_dt();
        let steps = (t_final / dt).round().max(1.0) as usize;
        Self { t_final, dt, stride: (steps / samples.max(1)).max(1) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub covariances: Vec<CovarianceMatrix>,
    pub means: Vec<DVector<f64>>,
    /// Frobenius distance of each recorded covariance to the target, if any.
    pub distances_to_target: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_covariance(&self) -> &CovarianceMatrix {
        self.covariances.last().expect("trajectory is never empty")
    }

    pub fn final_mean(&self) -> &DVector<f64> {
        self.means.last().expect("trajectory is never empty")
    }

    /// Purity at each sample; `NaN` where the covariance is not positive
    /// definite.
    pub fn purities(&self) -> Vec<f64> {
        self.covariances.iter().map(|v| purity(v).unwrap_or(f64::NAN)).collect()
    }
}

/// Classical 4th-order Runge–Kutta on the mean and covariance equations.
///
/// The number of steps is `round(t_final / dt)`, so the step actually taken
/// divides `t_final` exactly.
pub fn integrate(
    dd: &DriftDiffusion,
    v0: &CovarianceMatrix,
    mean0: &DVector<f64>,
    settings: IntegrationSettings,
    target: Option<&CovarianceMatrix>,
) -> Result<TrajectoryRecord, DynamicsError> {
    let n = dd.dim();
    if v0.matrix().nrows() != n || mean0.len() != n || target.is_some_and(|t| t.matrix().nrows() != n) {
        return Err(DynamicsError::ShapeMismatch(format!("system has dimension {n}")));
    }
    let IntegrationSettings { t_final, dt, stride } = settings;
    if !(dt > 0.0) || !(t_final >= 0.0) || stride == 0 || !dt.is_finite() || !t_final.is_finite() {
        return Err(DynamicsError::BadSettings(format!("t_final = {t_final}, dt = {dt}, stride = {stride}")));
    }
    let steps = (t_final / dt).round() as usize;
    let h = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    if !rk4_step_is_stable(dd, h) {
        return Err(DynamicsError::StepTooLarge { t: 0.0 });
    }

    let a = &dd.a;
    let d = &dd.d;
    let cov_rate = |v: &RMat| -> RMat {
        let av = a * v;
        let avt = av.transpose();
        av + avt + d
    };

    let mut record = TrajectoryRecord {
        times: Vec::new(),
        covariances: Vec::new(),
        means: Vec::new(),
        distances_to_target: target.map(|_| Vec::new()),
    };
    let push = |t: f64, v: &RMat, x: &DVector<f64>, record: &mut TrajectoryRecord| {
        let cov = CovarianceMatrix::from_symmetric(v.clone());
        if let (Some(dist), Some(tgt)) = (record.distances_to_target.as_mut(), target) {
            dist.push(frobenius_distance(&cov, tgt));
        }
        record.times.push(t);
        record.covariances.push(cov);
        record.means.push(x.clone());
    };

    let mut v = v0.matrix().clone();
    let mut x = mean0.clone();
    push(0.0, &v, &x, &mut record);
    let shift = RMat::identity(n, n) * DEFAULT_NEGATIVITY_TOL;
    for step in 1..=steps {
        let k1 = cov_rate(&v);
        let k2 = cov_rate(&(&v + &k1 * (h / 2.0)));
        let k3 = cov_rate(&(&v + &k2 * (h / 2.0)));
        let k4 = cov_rate(&(&v + &k3 * h));
        v += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        v = symmetrize(&v);

        let m1 = a * &x;
        let m2 = a * (&x + &m1 * (h / 2.0));
        let m3 = a * (&x + &m2 * (h / 2.0));
        let m4 = a * (&x + &m3 * h);
        x += (m1 + (m2 + m3) * 2.0 + m4) * (h / 6.0);

        let t = step as f64 * h;
        if !v.iter().all(|e| e.is_finite()) || (&v + &shift).cholesky().is_none() {
            return Err(DynamicsError::StepTooLarge { t });
        }
        if step % stride == 0 || step == steps {
            push(t, &v, &x, &mut record);
        }
    }
    Ok(record)
}

/// `dt_max` halved until RK4 damps every decaying mode of the system.
pub fn stable_step(dd: &DriftDiffusion, dt_max: f64) -> f64 {
    let mut dt = dt_max;
    while dt > 0.0 && dt.is_finite() && !rk4_step_is_stable(dd, dt) {
        dt /= 2.0;
    }
    dt
}

/// Whether RK4 with step `h` damps every decaying mode: the drift
/// eigenvalues `λᵢ` for the mean, the sums `λᵢ + λⱼ` for the covariance.
fn rk4_step_is_stable(dd: &DriftDiffusion, h: f64) -> bool {
    let lambdas = linalg::real_matrix_eigenvalues(&dd.a);
    let damped = |mu: num_complex::Complex64| {
        let z = mu * h;
        mu.re >= 0.0 || (1.0 + z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))).norm() <= 1.0 + 1e-12
    };
    lambdas.iter().all(|&li| damped(li) && lambdas.iter().all(|&lj| damped(li + lj)))
}

/// Summary of how a trajectory approaches its target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub final_distance: f64,
    /// First recorded time the distance is at or below each threshold.
    pub time_to_threshold: Vec<(f64, Option<f64>)>,
    /// Slope of `ln(distance)` against time; diagnostic only.
    pub fitted_rate: Option<f64>,
}

pub const CONVERGENCE_THRESHOLDS: [f64; 2] = [1e-3, 1e-6];

pub fn convergence_report(traj: &TrajectoryRecord) -> Result<ConvergenceSummary, DynamicsError> {
    let dist = traj.distances_to_target.as_ref().ok_or(DynamicsError::NoTarget)?;
    let final_distance = *dist.last().ok_or(DynamicsError::NoTarget)?;
    let time_to_threshold = CONVERGENCE_THRESHOLDS
        .iter()
        .map(|&thr| (thr, traj.times.iter().zip(dist).find(|(_, &d)| d <= thr).map(|(t, _)| *t)))
        .collect();

    // least squares on the samples above the rounding floor
    let pts: Vec<(f64, f64)> =
        traj.times.iter().zip(dist).filter(|(_, &d)| d > 1e-12).map(|(t, d)| (*t, d.ln())).collect();
    let fitted_rate = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        if var > 0.0 {
            cov / var
        } else {
            0.0
        }
    });
    Ok(ConvergenceSummary { final_distance, time_to_threshold, fitted_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn vacuum_system() -> DriftDiffusion {
        let c = CMat::from_row_slice(1, 2, &[Complex64::new(0.0, -FRAC_1_SQRT_2), Complex64::new(FRAC_1_SQRT_2, 0.0)]);
        DriftDiffusion::assemble(&RMat::zeros(2, 2), &c).unwrap()
    }

    #[test]
    fn empty_system_has_zero_drift() {
        let dd = DriftDiffusion::assemble(&RMat::zeros(4, 4), &CMat::zeros(1, 4)).unwrap();
        assert_eq!(dd.a, RMat::zeros(4, 4));
        assert_eq!(dd.d, RMat::zeros(4, 4));
        assert!(!dd.is_strictly_stable());
        assert!(matches!(steady_state(&dd), Err(DynamicsError::NotStable(_))));
    }

    #[test]
    fn passive_vacuum_coupling() {
        let dd = vacuum_system();
        assert!(max_abs(&(&dd.a + RMat::identity(2, 2) * 0.5)) < 1e-15);
        assert!(max_abs(&(&dd.d - RMat::identity(2, 2) * 0.5)) < 1e-15);
        assert_abs_diff_eq!(dd.spectral_abscissa, -0.5, epsilon = 1e-14);
        let v = steady_state(&dd).unwrap();
        assert!(max_abs(&(v.matrix() - RMat::identity(2, 2) * 0.5)) < 1e-14);
    }

    #[test]
    fn stability_predicate() {
        let stable = DriftDiffusion::from_parts(-RMat::identity(2, 2), RMat::zeros(2, 2));
        assert!(stable.is_strictly_stable());
        let marginal = DriftDiffusion::from_parts(RMat::zeros(2, 2), RMat::zeros(2, 2));
        assert!(!marginal.is_strictly_stable());
    }

    #[test]
    fn frozen_system_does_not_move() {
        let dd = DriftDiffusion::from_parts(RMat::zeros(2, 2), RMat::zeros(2, 2));
        let v0 = CovarianceMatrix::new(RMat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7])).unwrap();
        let m0 = DVector::from_vec(vec![0.3, -0.4]);
        let settings = IntegrationSettings { t_final: 1.0, dt: 0.1, stride: 1 };
        let traj = integrate(&dd, &v0, &m0, settings, None).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.covariances.iter().all(|v| v == &v0));
        assert!(traj.means.iter().all(|m| m == &m0));
    }

    #[test]
    fn vacuum_relaxation_matches_closed_form() {
        let dd = vacuum_system();
        let v0 = CovarianceMatrix::new(RMat::identity(2, 2)).unwrap();
        let target = CovarianceMatrix::vacuum(1);
        let settings = IntegrationSettings { t_final: 10.0, dt: 1e-3, stride: 100 };
        let traj = integrate(&dd, &v0, &DVector::zeros(2), settings, Some(&target)).unwrap();
        for (t, v) in traj.times.iter().zip(&traj.covariances) {
            let expected = 0.5 + 0.5 * (-t).exp();
            assert!((v.matrix()[(0, 0)] - expected).abs() < 1e-6);
            assert!((v.matrix()[(1, 1)] - expected).abs() < 1e-6);
            assert!(v.matrix()[(0, 1)].abs() < 1e-12);
        }
        let summary = convergence_report(&traj).unwrap();
        let rate = summary.fitted_rate.unwrap();
        assert!((rate + 1.0).abs() < 0.1, "rate {rate}");
        assert_abs_diff_eq!(summary.final_distance, FRAC_1_SQRT_2 * (-10.0_f64).exp(), epsilon = 1e-9);
        assert!(summary.time_to_threshold[0].1.is_some());
        assert!(summary.time_to_threshold[1].1.is_none());
    }

    #[test]
    fn stationary_trajectory_hits_thresholds_at_zero() {
        let dd = vacuum_system();
        let target = CovarianceMatrix::vacuum(1);
        let settings = IntegrationSettings { t_final: 1.0, dt: 0.01, stride: 10 };
        let traj = integrate(&dd, &target, &DVector::zeros(2), settings, Some(&target)).unwrap();
        let summary = convergence_report(&traj).unwrap();
        assert!(summary.time_to_threshold.iter().all(|(_, t)| *t == Some(0.0)));
    }

    #[test]
    fn report_requires_target() {
        let dd = vacuum_system();
        let settings = IntegrationSettings { t_final: 0.1, dt: 0.01, stride: 1 };
        let traj = integrate(&dd, &CovarianceMatrix::vacuum(1), &DVector::zeros(2), settings, None).unwrap();
        assert_eq!(convergence_report(&traj), Err(DynamicsError::NoTarget));
    }

    #[test]
    fn oversized_step_is_detected() {
        let dd = DriftDiffusion::from_parts(-RMat::identity(2, 2) * 100.0, RMat::identity(2, 2));
        let settings = IntegrationSettings { t_final: 10.0, dt: 0.5, stride: 1 };
        let res = integrate(&dd, &CovarianceMatrix::vacuum(1), &DVector::zeros(2), settings, None);
        assert!(matches!(res, Err(DynamicsError::StepTooLarge { .. })));
    }
}
