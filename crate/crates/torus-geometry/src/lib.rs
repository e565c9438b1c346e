//! Geometry of finite translation orbits on `T^t` under the sup metric.
//!
//! [`covering_radius`] bounds `sup_x dist(x, P)` from above by an exhaustive
//! grid search in exact integer arithmetic; the bound exceeds the true value
//! by at most half the grid spacing. [`find_witness`] searches the box of
//! perturbations `(v, e)` in a fixed order for one whose orbit is fine enough.
//! [`chain`] strings these together with stage generation.

pub mod chain;
mod grid;
mod vector;
mod witness;

pub use grid::{covering_radius, covering_radius_with, exceeds_radius, GridBudget};
pub use vector::{orbit, stage_vector, TorusVector};
pub use witness::{
    candidate_orbit, candidate_weights, find_witness, plain_denominator, TranslationWitness,
    WitnessQuery,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TorusError {
    #[error("empty point set")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("resolution must be positive and at most 1")]
    BadResolution,
    #[error("dimension {dim} exceeds the grid cap {cap} (raise it explicitly to proceed)")]
    DimensionCap { dim: usize, cap: usize },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no witness within bound {bound} (searched {searched} candidates)")]
    NoWitness { bound: u64, searched: u64 },
    #[error(transparent)]
    Stage(#[from] stage_gen::StageError),
}
