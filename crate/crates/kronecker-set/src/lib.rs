//! Exact interval sets on the circle, the nested level sets `L_n` of a
//! stage chain, and the integer search for `k` with `kx ≈ f(x)` on `L_n`.

mod interval;
mod level;
mod measure;
mod solve;

pub use interval::{IntervalSet, Span};
pub use level::{level_lefts, level_length, level_set, nesting_offsets};
pub use measure::{max_atom_weight, stage_measure, support_contained, Atom, AtomicMeasure};
pub use solve::{
    kronecker_best, kronecker_nearest, kronecker_solve, sample_targets, KroneckerSolution,
    K_SEARCH_CAP,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KroneckerError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("no k within tolerance; best k = {} with error bound {}", best.k, best.error_bound)]
    NoSolution { best: Box<KroneckerSolution> },
}
