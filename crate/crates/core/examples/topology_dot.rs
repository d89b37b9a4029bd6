//! Writes the interaction graph of a synthesized system in Graphviz format.
//!
//! Usage: `cargo run --example topology_dot > chain.dot && dot -Tsvg chain.dot`

use gaussprep::cli::emit_topology;
use gaussprep::synthesis::{five_mode_chain, synthesize_with_params, DEFAULT_SYNTHESIS_TOL};
use gaussprep::{build_graph, synthesize, FamilyParams, Gains};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let (params, gains) = five_mode_chain(0.3);
    let z = build_graph(&params).unwrap();
    let chain = synthesize_with_params(&z, &params, &gains, DEFAULT_SYNTHESIS_TOL).unwrap();
    print!("{}", emit_topology(&chain, 1e-9));

    // a generic member couples far more pairs
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = build_graph(&FamilyParams::random(4, &mut rng)).unwrap();
    let generic = synthesize(&z, &Gains::default_for(4), DEFAULT_SYNTHESIS_TOL).unwrap();
    print!("{}", emit_topology(&generic, 1e-9));
}
