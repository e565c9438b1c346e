//! Exact finite partitions of `S¹ × [0,1]^(t−1)` built from stage data, the
//! label bijections between them and the horizontal approximation used at
//! each refinement step.
//!
//! Cells have rational corners, so every measure here is exact. Positional
//! work at large `q` is replaced by counting bounds ([`p0_certificate`],
//! [`eta_prime_bound`]); the exact enumerations check them on small cases.

pub mod algebra;
pub mod cylinder;
pub mod horizontal;
pub mod partition;
pub mod refine;
pub mod region;
pub mod stacking;

use gk_base::Z;
use stage_gen::StageError;
use thiserror::Error;

pub use algebra::{
    build_k, index_permutation, k_component, uniform_measure, verify_diagram, AlgebraMap,
    DiagramResult, LabelAction, MapCheck,
};
pub use cylinder::{invariant_under, telescope, Cylinder, JTransform, Piece, TelescopeReport};
pub use horizontal::{
    build_p0, eta_prime_bound, eta_prime_exact, feasible_at, minimal_feasible_d, p0_certificate,
    trapezoid, Budgets, EtaPrimeBound, EtaPrimeExact, HorizontalParams, P0Certificate,
    P0Partition,
};
pub use partition::{
    all_labels, build_eta, check_eta, eta_component, CellPartition, EtaReport, Label, CELL_CAP,
};
pub use refine::{
    class_weights, classes_equivariant, classify_family, lemma_square, slice_divisor,
    FamilyClasses, Refinement, SquareReport,
};
pub use region::Region;
pub use stacking::{brute_gamma_tilde, stacking, StackSlice, StackingReport};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("over budget: {0}")]
    Budget(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("invalid partition: {0}")]
    Invalid(String),
    #[error("infeasible: {floor} fails ({detail})")]
    Infeasible {
        floor: String,
        detail: String,
        minimal_q: Option<Z>,
    },
    #[error(transparent)]
    Stage(#[from] StageError),
}
