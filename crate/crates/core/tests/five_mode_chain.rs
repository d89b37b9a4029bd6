use std::f64::consts::FRAC_1_SQRT_2;

use approx::assert_abs_diff_eq;
use gaussprep::analysis::{entanglement_map, reduce, ENTANGLED_THRESHOLD};
use gaussprep::cli::emit_topology;
use gaussprep::dynamics::{is_strictly_stable, steady_state, DEFAULT_STABILITY_MARGIN};
use gaussprep::gaussian_states::{cov_from_graph, purity, validate_graph};
use gaussprep::linalg::{max_abs, remove_index};
use gaussprep::state_family::{delta_pair, joint_diag_commuting, membership};
use gaussprep::synthesis::{five_mode_chain, is_local_single, is_passive, synthesize_with_params, DEFAULT_SYNTHESIS_TOL};
use gaussprep::{build_graph, BlockSign, CMat, Complex64, DriftDiffusion, GraphMatrix, RMat};

const ALPHAS: [f64; 3] = [0.1, 0.3, 0.7];

/// `Y` of the five-mode state: `X = 0`.
fn chain_y(alpha: f64) -> RMat {
    let (c, s) = ((2.0 * alpha).cosh(), (2.0 * alpha).sinh());
    #[rustfmt::skip]
    let y = RMat::from_row_slice(5, 5, &[
        c, 0.0, 0.0, 0.0, s,
        0.0, c, 0.0, -s, 0.0,
        0.0, 0.0, c + s, 0.0, 0.0,
        0.0, -s, 0.0, c, 0.0,
        s, 0.0, 0.0, 0.0, c,
    ]);
    y
}

fn realization(alpha: f64) -> (GraphMatrix, gaussprep::SystemRealization) {
    let (params, gains) = five_mode_chain(alpha);
    let z = build_graph(&params).unwrap();
    let real = synthesize_with_params(&z, &params, &gains, DEFAULT_SYNTHESIS_TOL).unwrap();
    (z, real)
}

#[test]
fn built_graph_matches_closed_form() {
    for alpha in ALPHAS {
        let (params, _) = five_mode_chain(alpha);
        let z = build_graph(&params).unwrap();
        assert!(max_abs(z.x()) < 1e-12);
        assert!(max_abs(&(z.y() - chain_y(alpha))) < 1e-12);
        validate_graph(&RMat::zeros(5, 5), &chain_y(alpha), 1e-10).unwrap();
    }
}

#[test]
fn plus_member_is_cosh_sinh_block() {
    let alpha: f64 = 0.3;
    let (c, s) = ((2.0 * alpha).cosh(), (2.0 * alpha).sinh());
    let pair = delta_pair(Complex64::new(0.0, (2.0 * alpha).exp())).unwrap();
    let expected = CMat::from_row_slice(2, 2, &[c, s, s, c].map(|v| Complex64::new(0.0, v)));
    let member = pair.member(BlockSign::Plus);
    assert!((member - &expected).iter().all(|e| e.norm() < 1e-12));
}

#[test]
fn covariance_has_pure_determinant() {
    for alpha in ALPHAS {
        let (params, _) = five_mode_chain(alpha);
        let v = cov_from_graph(&build_graph(&params).unwrap());
        assert_abs_diff_eq!(v.matrix().determinant() * 1024.0, 1.0, epsilon = 1e-9);
    }
}

#[test]
fn remaining_block_spectrum() {
    let alpha: f64 = 0.3;
    let (params, _) = five_mode_chain(alpha);
    let z = build_graph(&params).unwrap();
    let rest = remove_index(&z.z(), 2);
    let (q, eigs) = joint_diag_commuting(&rest.map(|c| c.re), &rest.map(|c| c.im), 1e-10).unwrap();
    let mut ims: Vec<f64> = eigs.iter().map(|e| e.im).collect();
    ims.sort_by(f64::total_cmp);
    let (lo, hi) = ((-2.0 * alpha).exp(), (2.0 * alpha).exp());
    for (got, want) in ims.iter().zip([lo, lo, hi, hi]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
    }
    assert!(eigs.iter().all(|e| e.re.abs() < 1e-12));
    assert!(max_abs(&(q.transpose() * &q - RMat::identity(4, 4))) < 1e-12);
}

#[test]
fn membership_finds_the_central_mode() {
    for alpha in ALPHAS {
        let (params, _) = five_mode_chain(alpha);
        let cert = membership(&build_graph(&params).unwrap(), 1e-8).unwrap();
        assert_eq!(cert.ell, 2);
        assert_eq!(cert.decoupled_modes, vec![2]);
        assert_abs_diff_eq!(cert.zbar.im, (2.0 * alpha).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(cert.zbar.re, 0.0, epsilon = 1e-12);
    }
}

#[test]
fn realization_is_passive_local_and_stable() {
    for alpha in ALPHAS {
        let (_, real) = realization(alpha);
        assert!(is_passive(&real.g, 1e-12));
        assert_eq!(is_local_single(&real.c, 1e-12), Some(2));
        // L = (coshα + sinhα)/√2 q₃ + i(coshα − sinhα)/√2 p₃
        let (ch, sh) = (alpha.cosh(), alpha.sinh());
        assert_abs_diff_eq!(real.c[(0, 2)].re, (ch + sh) * FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(real.c[(0, 2)].im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(real.c[(0, 7)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(real.c[(0, 7)].im, (ch - sh) * FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(real.p[(2, 0)].im, (ch - sh) * FRAC_1_SQRT_2, epsilon = 1e-15);
        let dd = DriftDiffusion::assemble(&real.g, &real.c).unwrap();
        assert!(is_strictly_stable(&dd, DEFAULT_STABILITY_MARGIN));
        assert_eq!(real.controllability.rank, 5);
        assert!(real.controllability.tests.agree());
    }
}

#[test]
fn steady_state_is_the_target() {
    for alpha in ALPHAS {
        let (z, real) = realization(alpha);
        let dd = DriftDiffusion::assemble(&real.g, &real.c).unwrap();
        let v = steady_state(&dd).unwrap();
        assert!((v.matrix() - cov_from_graph(&z).matrix()).norm() < 1e-8);
        assert_abs_diff_eq!(purity(&v).unwrap(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn outer_pair_marginal_is_two_mode_squeezed() {
    let alpha: f64 = 0.3;
    let (params, _) = five_mode_chain(alpha);
    let v = cov_from_graph(&build_graph(&params).unwrap());
    let v15 = reduce(&v, &[0, 4]).unwrap();
    let (c, s) = ((2.0 * alpha).cosh() / 2.0, (2.0 * alpha).sinh() / 2.0);
    #[rustfmt::skip]
    let expected = RMat::from_row_slice(4, 4, &[
        c, -s, 0.0, 0.0,
        -s, c, 0.0, 0.0,
        0.0, 0.0, c, s,
        0.0, 0.0, s, c,
    ]);
    assert!(max_abs(&(v15.matrix() - expected)) < 1e-12, "{}", v15.matrix());
}

#[test]
fn only_mirror_pairs_are_entangled() {
    for alpha in ALPHAS {
        let (params, _) = five_mode_chain(alpha);
        let map = entanglement_map(&cov_from_graph(&build_graph(&params).unwrap()), 1e-9).unwrap();
        let pairs: Vec<(usize, usize)> = map.entangled_pairs(ENTANGLED_THRESHOLD).iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(pairs, vec![(0, 4), (1, 3)]);
        assert_abs_diff_eq!(map.value(0, 4), 2.0 * alpha, epsilon = 1e-9);
        assert_abs_diff_eq!(map.value(1, 3), 2.0 * alpha, epsilon = 1e-9);
        assert!(map.row_max(2) < 1e-12);
    }
}

#[test]
fn topology_is_a_path_with_central_reservoir() {
    let (_, real) = realization(0.3);
    let dot = emit_topology(&real, 1e-9);
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("--")).map(str::trim).collect();
    assert_eq!(
        edges,
        vec!["1 -- 2;", "2 -- 3;", "3 -- 4;", "4 -- 5;", "reservoir -- 3 [style=dashed];"]
    );
}
