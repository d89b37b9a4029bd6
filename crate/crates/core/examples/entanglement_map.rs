//! Pairwise logarithmic negativity of a family member.

use gaussprep::analysis::ENTANGLED_THRESHOLD;
use gaussprep::gaussian_states::cov_from_graph;
use gaussprep::{build_graph, entanglement_map, FamilyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = FamilyParams::random(5, &mut rng);
    let v = cov_from_graph(&build_graph(&params).unwrap());
    let map = entanglement_map(&v, 1e-9).unwrap();

    println!("E_N matrix ={:.4}", map.pair_values);
    for (j, k, e) in map.entangled_pairs(ENTANGLED_THRESHOLD) {
        println!("modes {}-{}: E_N = {e:.6}", j + 1, k + 1);
    }
    // the reservoir mode factors out of the state
    println!("reservoir mode {} row max = {:.1e}", params.ell() + 1, map.row_max(params.ell()));
}
