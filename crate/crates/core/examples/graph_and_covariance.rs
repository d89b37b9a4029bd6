//! Pure Gaussian states as graph matrices and covariance matrices.
//!
//! Builds a random two-mode graph matrix, converts it to a covariance matrix
//! and back, and prints purity and the symplectic spectrum.

use gaussprep::analysis::symplectic_eigenvalues;
use gaussprep::gaussian_states::{cov_from_graph, graph_from_cov, purity};
use gaussprep::linalg::max_abs;
use gaussprep::{GraphMatrix, RMat};

fn main() {
    let x = RMat::from_row_slice(2, 2, &[0.4, -0.2, -0.2, 0.1]);
    let y = RMat::from_row_slice(2, 2, &[1.5, 0.6, 0.6, 0.9]);
    let z = GraphMatrix::new(x, y).expect("Y is positive definite");

    let v = cov_from_graph(&z);
    println!("V (q1, q2, p1, p2) ={}", v.matrix());
    println!("purity = {:.12}", purity(&v).unwrap());
    println!("symplectic eigenvalues = {:?}", symplectic_eigenvalues(&v));

    let back = graph_from_cov(&v, 1e-9).unwrap();
    let err = max_abs(&(back.x() - z.x())).max(max_abs(&(back.y() - z.y())));
    println!("round trip error = {err:.1e}");
}
