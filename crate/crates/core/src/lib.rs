//! Dissipative preparation of pure Gaussian states.
//!
//! Which pure Gaussian states can be reached as the unique steady state of a
//! linear quantum system whose Hamiltonian is passive (beam-splitter-like) and
//! whose only dissipation is a single reservoir acting on a single mode? This
//! crate answers that question constructively:
//!
//! - [`gaussian_states`] represents pure states by their graph matrix
//!   `Z = X + iY` and converts to and from covariance matrices.
//! - [`state_family`] builds members of the preparable family and decides
//!   membership of an arbitrary graph matrix, returning a certificate.
//! - [`synthesis`] turns a certified graph matrix into concrete system
//!   matrices `(R, Γ, P, G, C)` and checks passivity, locality and
//!   controllability.
//! - [`dynamics`] assembles the moment equations, solves the steady state and
//!   integrates the covariance in time.
//! - [`analysis`] computes logarithmic negativities and distances.
//! - [`cli`] ties everything together behind JSON documents and the
//!   `gaussprep` binary.
//!
//! Modes are indexed from 0 in the library API. Files and reports written by
//! [`cli`] use 1-based mode labels.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod controllability;
pub mod dynamics;
pub mod gaussian_states;
pub mod linalg;
pub mod state_family;
pub mod synthesis;

pub use analysis::{entanglement_map, frobenius_distance, log_negativity_2mode, reduce, EntanglementMap};
pub use controllability::{pair_controllability, PairControllability};
pub use dynamics::{DriftDiffusion, TrajectoryRecord};
pub use gaussian_states::{CovarianceMatrix, GraphMatrix, StateError, SymplecticForm};
pub use state_family::{
    build_graph, delta_pair, membership, BlockSign, DeltaPair, FamilyParams, MembershipCertificate, Rejection,
};
pub use synthesis::{synthesize, Gains, SynthesisError, SystemRealization};

pub use num_complex::Complex64;

/// Real dense matrix used throughout the crate.
pub type RMat = nalgebra::DMatrix<f64>;
/// Complex dense matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<Complex64>;
