//! From a certified graph matrix to a passive, locally dissipated system.

use gaussprep::synthesis::{is_local_single, is_passive, DEFAULT_SYNTHESIS_TOL};
use gaussprep::{build_graph, synthesize, FamilyParams, Gains};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 5;
    let z = build_graph(&FamilyParams::random(n, &mut rng)).unwrap();

    let real = synthesize(&z, &Gains::default_for(n), DEFAULT_SYNTHESIS_TOL).expect("member synthesizes");
    println!("reservoir mode: {}", real.ell + 1);
    println!("R ={}", real.r);
    println!("Gamma ={}", real.gamma);
    println!("C = {:.4}", real.c);
    println!("passive: {}", is_passive(&real.g, 1e-9));
    println!("single local coupling on mode: {:?}", is_local_single(&real.c, 1e-9).map(|k| k + 1));
    let ctrl = &real.controllability;
    println!(
        "controllability: rank {} of {}, PBH min singular value {:.3e}, tests agree: {}",
        ctrl.rank,
        n,
        ctrl.pbh_min_sv,
        ctrl.tests.agree()
    );
}
