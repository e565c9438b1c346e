//! Integer stages `(t_n, p_n, q_n, a_n, b_n, s_n)` and their exact checks.
//!
//! Everything here is arbitrary-precision integer arithmetic. A stage is
//! built from its parent by [`next_stage`] given a perturbation `(v, e)`
//! (normally found by the torus search), and [`check_stage`] re-verifies the
//! five arithmetic conditions a stage pair must satisfy.

mod check;
mod policy;
mod stage;
mod step;

pub use check::{check_stage, ConditionReport};
pub use policy::{ExponentRule, GrowthPolicy};
pub use stage::{init_stage, StageParams};
pub use step::{
    candidate_is_admissible, expand_b, next_stage, next_stage_traced, perturbed_b, solve_d_p,
    Perturbation, StageTrace,
};

use gk_base::Z;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StageError {
    #[error("stage index mismatch: expected parent of stage {child}, got stage {parent}")]
    IndexMismatch { parent: u32, child: u32 },
    #[error("perturbation has length {got}, expected t_(n+1) = {expected}")]
    WitnessLength { got: usize, expected: usize },
    #[error("perturbation outside the search bound {bound}: |v|_inf = {v_norm}, e = {e}")]
    WitnessBound { bound: Z, v_norm: Z, e: Z },
    #[error("perturbation gives a non-admissible child: {0}")]
    Inadmissible(String),
    #[error("invalid stage: {0}")]
    Invalid(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("resource limit: {0}")]
    Size(String),
}
