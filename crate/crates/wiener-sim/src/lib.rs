//! Planar Brownian paths on a dyadic grid and the cut-and-rotate maps `U_σ`.
//!
//! Paths are sampled once; [`cut_rotate`] only updates an exact angle per
//! grid increment, so inverses and compositions are bit-exact. The sector
//! symbols, covariance checks and conditional-expectation estimates are
//! Monte Carlo statistics over the ensemble.

mod condexp;
mod ensemble;
mod stats;
mod symbols;

pub use condexp::{
    cond_exp, dyadic_probe, CellEstimate, CondExpReport, DyadicProbeReport, SectorFamily, Word,
};
pub use ensemble::{cut_rotate, sample_paths, PathEnsemble, RotationSpec, MAX_INCREMENTS};
pub use stats::{covariance_check, increment_moments, mean_se, CovarianceReport};
pub use symbols::{
    classify, joint_frequencies, marginal_frequencies, sector, shift_law, stage_shifts, turns,
    ShiftLawReport, Symbols, BOUNDARY_BAND,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WienerError {
    #[error("invalid rotation: {0}")]
    Spec(String),
    #[error("cut time {time} is not dyadic at depth {depth}")]
    NotDyadic { time: String, depth: u32 },
    #[error("budget exceeded: {0}")]
    Budget(String),
}
