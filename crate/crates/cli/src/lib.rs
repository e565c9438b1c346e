//! Orchestration for the `gk` binary: configuration, one runner per module,
//! the full pipeline and the report files.
//!
//! Every file written carries the config hash and the seed. Nothing written
//! depends on timing or on the number of worker threads.

pub mod config;
pub mod modules;
pub mod output;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use output::{Check, ModuleOutput, Stamp, Table};
pub use pipeline::{run_pipeline, PipelineOutcome};

use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// A cap or floor of the configuration cannot be met.
    #[error("infeasible configuration: {cap} ({detail}); hint: {hint}")]
    Infeasible {
        cap: String,
        detail: String,
        hint: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible { .. } | CliError::Config(_) => EXIT_INFEASIBLE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub(crate) fn infeasible(cap: &str, detail: impl Into<String>, hint: &str) -> Self {
        CliError::Infeasible {
            cap: cap.into(),
            detail: detail.into(),
            hint: hint.into(),
        }
    }
}

impl From<stage_gen::StageError> for CliError {
    fn from(e: stage_gen::StageError) -> Self {
        match e {
            stage_gen::StageError::Size(d) => {
                CliError::infeasible("stage size", d, "use fewer stages or a slower growth policy")
            }
            stage_gen::StageError::Policy(d) => CliError::Config(format!("policy: {d}")),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<torus_geometry::TorusError> for CliError {
    fn from(e: torus_geometry::TorusError) -> Self {
        use torus_geometry::TorusError as T;
        match e {
            T::Budget(d) => CliError::infeasible(
                "witness.budget",
                d,
                "raise witness.budget.max_nodes / max_work or lower witness.max_dim",
            ),
            T::DimensionCap { dim, cap } => CliError::infeasible(
                "witness.budget.max_dim",
                format!("dimension {dim} above {cap}"),
                "raise witness.budget.max_dim",
            ),
            T::NoWitness { bound, searched } => CliError::infeasible(
                "policy.domain_base",
                format!("no witness within bound {bound} after {searched} candidates"),
                "raise policy.domain_base to enlarge the search box",
            ),
            T::Stage(s) => s.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<kronecker_set::KroneckerError> for CliError {
    fn from(e: kronecker_set::KroneckerError) -> Self {
        match e {
            kronecker_set::KroneckerError::Budget(d) => CliError::infeasible(
                "kronecker search cap",
                d,
                "pick a probe stage with smaller q",
            ),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<wiener_sim::WienerError> for CliError {
    fn from(e: wiener_sim::WienerError) -> Self {
        match e {
            wiener_sim::WienerError::Budget(d) => {
                CliError::infeasible("wiener budget", d, "lower wiener.depth or wiener.paths")
            }
            wiener_sim::WienerError::NotDyadic { time, depth } => CliError::infeasible(
                "wiener.depth",
                format!("cut time {time} is not dyadic at depth {depth}"),
                "raise wiener.depth to at least log2 of the piece count",
            ),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<partition_algebra::PartitionError> for CliError {
    fn from(e: partition_algebra::PartitionError) -> Self {
        use partition_algebra::PartitionError as P;
        match e {
            P::Infeasible {
                floor,
                detail,
                minimal_q,
            } => CliError::Infeasible {
                cap: floor,
                detail,
                hint: match minimal_q {
                    Some(q) => format!("raise q_(n+1) to at least {q} (diagram.tiny.d_min_second)"),
                    None => "enlarge the second stage of the pair".into(),
                },
            },
            P::Budget(d) => CliError::infeasible(
                "partition enumeration cap",
                d,
                "use a smaller stage pair",
            ),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<smooth_conjugacy::ConjugacyError> for CliError {
    fn from(e: smooth_conjugacy::ConjugacyError) -> Self {
        match e {
            smooth_conjugacy::ConjugacyError::Budget(d) => CliError::infeasible(
                "conjugacy grid budget",
                d,
                "lower conjugacy.assemble.res or use a stage with q_n ≤ 1000",
            ),
            smooth_conjugacy::ConjugacyError::Precondition(d) => CliError::Config(d),
        }
    }
}
