//! Moment dynamics: the Lyapunov steady state and an RK4 relaxation toward it.

use gaussprep::dynamics::{convergence_report, integrate, steady_state, IntegrationSettings};
use gaussprep::gaussian_states::cov_from_graph;
use gaussprep::synthesis::DEFAULT_SYNTHESIS_TOL;
use gaussprep::{build_graph, frobenius_distance, synthesize, CovarianceMatrix, DriftDiffusion, FamilyParams, Gains};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 4;
    let z = build_graph(&FamilyParams::random(n, &mut rng)).unwrap();
    let real = synthesize(&z, &Gains::default_for(n), DEFAULT_SYNTHESIS_TOL).unwrap();
    let dd = DriftDiffusion::assemble(&real.g, &real.c).unwrap();
    let target = cov_from_graph(&z);

    println!("spectral abscissa = {:.4}", dd.spectral_abscissa);
    let v_ss = steady_state(&dd).unwrap();
    println!("|V_ss - V_target|_F = {:.2e}", frobenius_distance(&v_ss, &target));

    let settings = IntegrationSettings::for_system(&dd, 20.0, 100);
    let mean0 = DVector::from_element(2 * n, 1.0);
    let traj = integrate(&dd, &CovarianceMatrix::vacuum(n), &mean0, settings, Some(&target)).unwrap();
    let summary = convergence_report(&traj).unwrap();
    println!("dt = {:.3e}, {} samples", settings.dt, traj.len());
    println!("final distance = {:.2e}", summary.final_distance);
    for (threshold, t) in &summary.time_to_threshold {
        match t {
            Some(t) => println!("  distance below {threshold:.0e} at t = {t:.3}"),
            None => println!("  distance never below {threshold:.0e}"),
        }
    }
    if let Some(rate) = summary.fitted_rate {
        println!("fitted log-distance rate = {rate:.4}");
    }
    println!("final |mean| = {:.2e}", traj.final_mean().amax());
}
