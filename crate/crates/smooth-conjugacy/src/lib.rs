//! Grid-sampled smooth measure-preserving maps of `T × [0,1]^(d−1)`.
//!
//! Maps are kept in closed form ([`Diffeo`]) and sampled on cell-centred
//! grids ([`GridDiffeo`]). Derivatives, Jacobians and norms are finite
//! differences of the closed forms at the nodes.
//!
//! Elementary factors: rotations `S_α`, fibered rotations
//! `z ↦ z + a φ(x)` with a plateau `φ`, and area-preserving twists in the
//! plane of two coordinates ([`twist`]). Layers of twists give the
//! quasi-permutations, and compositions of those give `A`.

pub mod assemble;
pub mod bump;
pub mod conj;
pub mod grid;
pub mod map;
pub mod quasi;
pub mod twist;

use thiserror::Error;

pub use assemble::{
    assemble_a, check_candidate, equivariance_residual, AReport, AssembleConfig, Assembled, Factor,
    MAX_DIMS,
};
pub use bump::{plateau, smooth_step, smooth_step_deriv, Plateau};
pub use conj::{
    calibrate, calibrated_c, ck_distance, compose_t, conjugate, convergence_gap, image_volumes,
    period_of, periodicity_residual, random_alphas, random_boxes, random_test_map, GapReport,
    VolumeCheck, CALIBRATED_C,
};
pub use grid::{
    derivative, jacobian_det, jacobian_deviation, norm, norm_at, norm_both, Grid, GridDiffeo,
    NormReport,
};
pub use map::{
    circle_diff, image, preimage, wrap, Composition, Diffeo, FiberedRotation, Identity, Inverse,
    Rotation,
};
pub use quasi::{
    quasi_permutation, transport_fraction, transposition_layers, CubeCells, QuasiPermutation,
};
pub use twist::{sector_integral, PBall, TwistLayer, TwistProfile};

#[derive(Debug, Error)]
pub enum ConjugacyError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("over budget: {0}")]
    Budget(String),
}
