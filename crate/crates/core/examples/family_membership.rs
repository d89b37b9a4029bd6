//! Building family members and deciding membership.
//!
//! A random member is built, its modes are relabeled, and the membership test
//! recovers the reservoir mode and the spectrum. A small perturbation that
//! couples the reservoir mode is then rejected.

use gaussprep::linalg::permute_congruence;
use gaussprep::{build_graph, membership, Complex64, FamilyParams, GraphMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = FamilyParams::random(6, &mut rng);
    let z = build_graph(&params).unwrap();
    println!("built N = 6 member, reservoir mode {}", params.ell() + 1);

    let relabel = [3, 0, 5, 1, 4, 2];
    let shuffled = GraphMatrix::from_complex(&permute_congruence(&z.z(), &relabel), 1e-10).unwrap();
    let cert = membership(&shuffled, 1e-8).expect("relabeled member is accepted");
    println!("after relabeling: reservoir mode {}, zbar = {:.6}", cert.ell + 1, cert.zbar);
    println!("remaining spectrum:");
    for (e, k) in cert.spectrum.iter().zip(&cert.kinds) {
        println!("  {e:.6}  {k:?}");
    }

    let mut bad = z.z();
    let (l, j) = (params.ell(), (params.ell() + 1) % 6);
    bad[(l, j)] += Complex64::new(0.0, 1e-3);
    bad[(j, l)] += Complex64::new(0.0, 1e-3);
    match membership(&GraphMatrix::from_complex(&bad, 1e-10).unwrap(), 1e-8) {
        Ok(_) => println!("perturbed matrix accepted"),
        Err(r) => println!("perturbed matrix rejected: {} ({r})", r.code()),
    }
}
