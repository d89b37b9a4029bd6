//! The five-mode chain: a nearest-neighbour beam-splitter path dissipated at
//! its centre prepares two two-mode squeezed pairs, (1,5) and (2,4).
//!
//! Usage: `cargo run --example five_mode_chain -- [alpha]`

use gaussprep::dynamics::steady_state;
use gaussprep::gaussian_states::{cov_from_graph, purity};
use gaussprep::synthesis::{five_mode_chain, synthesize_with_params, DEFAULT_SYNTHESIS_TOL};
use gaussprep::{build_graph, entanglement_map, frobenius_distance, DriftDiffusion};

fn main() {
    let alpha: f64 = std::env::args().nth(1).map(|s| s.parse().expect("alpha is a number")).unwrap_or(0.3);
    let (params, gains) = five_mode_chain(alpha);
    let z = build_graph(&params).unwrap();
    let real = synthesize_with_params(&z, &params, &gains, DEFAULT_SYNTHESIS_TOL).unwrap();

    println!("R ={}", real.r);
    println!("L coefficients on mode 3: q {:.6}, p {:.6}", real.c[(0, 2)], real.c[(0, 7)]);

    let dd = DriftDiffusion::assemble(&real.g, &real.c).unwrap();
    let v = steady_state(&dd).unwrap();
    println!("steady state distance to target = {:.2e}", frobenius_distance(&v, &cov_from_graph(&z)));
    println!("purity = {:.12}", purity(&v).unwrap());

    let map = entanglement_map(&v, 1e-9).unwrap();
    println!("E(1,5) = {:.6}, E(2,4) = {:.6}, 2|alpha| = {:.6}", map.value(0, 4), map.value(1, 3), 2.0 * alpha.abs());
}
