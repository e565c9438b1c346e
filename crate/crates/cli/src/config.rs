//! The experiment configuration and its hash.

use std::path::{Path, PathBuf};

use gk_base::rational::serde_str;
use gk_base::Z;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smooth_conjugacy::AssembleConfig;
use stage_gen::GrowthPolicy;
use torus_geometry::chain::WitnessConfig;

use crate::CliError;

/// Hard limits that keep every run at desk scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Largest `q_n` of any stage in the chain.
    #[serde(with = "serde_str::int")]
    pub q_cap: Z,
    /// Largest number of Brownian paths in one ensemble.
    pub max_paths: usize,
    /// Largest number of nodes on a conjugacy grid.
    pub max_grid_nodes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            q_cap: Z::from(10u8).pow(1000u32),
            max_paths: 1_000_000,
            max_grid_nodes: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KroneckerConfig {
    /// Stage index, first rotation numerator and denominator of the probe
    /// stage `b = (1, b_1)`; `b_1` is the least weight with a fine orbit.
    pub probe_n: u32,
    pub probe_p: u64,
    pub probe_q: u64,
    /// Grid resolution `1/probe_resolution` for the probe radius.
    pub probe_resolution: u64,
    pub targets: usize,
    /// Targets are `c/target_denominator` with uniform `c`.
    pub target_denominator: u64,
}

impl Default for KroneckerConfig {
    fn default() -> Self {
        KroneckerConfig {
            probe_n: 4,
            probe_p: 1,
            probe_q: 61,
            probe_resolution: 244,
            targets: 100,
            target_denominator: 1000,
        }
    }
}

/// An atomic measure for the covariance check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// The uniform measure on the left endpoints of `L_n` of chain stage `n`.
    Stage { n: u32 },
    /// Explicit `(position, weight)` pairs as rational strings.
    Atoms { atoms: Vec<(String, String)> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WienerConfig {
    pub paths: usize,
    pub depth: u32,
    pub max_power: i64,
    pub measures: Vec<MeasureSpec>,
    pub shift_paths: usize,
    pub shift_depth: u32,
    pub shift_powers: Vec<i64>,
    /// Largest `q_n` for the symbol-dynamics stage.
    pub shift_q_max: u64,
}

impl Default for WienerConfig {
    fn default() -> Self {
        WienerConfig {
            paths: 100_000,
            depth: 3,
            max_power: 8,
            measures: vec![
                MeasureSpec::Stage { n: 1 },
                MeasureSpec::Stage { n: 2 },
                MeasureSpec::Atoms {
                    atoms: vec![("1/10".into(), "1/4".into()), ("1/3".into(), "3/4".into())],
                },
            ],
            shift_paths: 20_000,
            shift_depth: 3,
            shift_powers: vec![1, 2, -1, 7],
            shift_q_max: 8,
        }
    }
}

/// The small stage pair used by the partition and conjugacy checks: stage 1
/// with `d ≥ d_min_first`, then one `t`-doubling step with constant
/// exponent and `d ≥ d_min_second`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TinyPairConfig {
    pub d_min_first: u64,
    pub d_min_second: u64,
}

impl Default for TinyPairConfig {
    fn default() -> Self {
        TinyPairConfig {
            d_min_first: 2,
            d_min_second: 288,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagramConfig {
    pub tiny: TinyPairConfig,
    /// `q` values of the stacking sweep, each with every weight pair below.
    pub stacking_q: Vec<u64>,
    pub stacking_b: Vec<[u64; 2]>,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        DiagramConfig {
            tiny: TinyPairConfig::default(),
            stacking_q: vec![7, 12, 25, 31, 60],
            stacking_b: vec![[1, 2], [3, 1], [2, 3]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConjugacyConfig {
    pub assemble: AssembleConfig,
    pub volume_boxes: usize,
    pub volume_samples: usize,
    pub gap_maps: usize,
    pub gap_dims: Vec<usize>,
    pub gap_k_max: usize,
    /// Seeds of the gap test maps start here, away from the calibration
    /// seeds.
    pub gap_seed_base: u64,
}

impl Default for ConjugacyConfig {
    fn default() -> Self {
        ConjugacyConfig {
            assemble: AssembleConfig::default(),
            volume_boxes: 100,
            volume_samples: 100_000,
            gap_maps: 20,
            gap_dims: vec![2, 3],
            gap_k_max: 2,
            gap_seed_base: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Stages `0..=stages` of the main chain.
    pub stages: u32,
    pub policy: GrowthPolicy,
    pub witness: WitnessConfig,
    pub caps: Caps,
    pub kronecker: KroneckerConfig,
    pub wiener: WienerConfig,
    pub diagram: DiagramConfig,
    pub conjugacy: ConjugacyConfig,
    /// Not part of the hash.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            stages: 2,
            policy: GrowthPolicy::default(),
            witness: WitnessConfig::default(),
            caps: Caps::default(),
            kronecker: KroneckerConfig::default(),
            wiener: WienerConfig::default(),
            diagram: DiagramConfig::default(),
            conjugacy: ConjugacyConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Internal(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cap = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must be positive")))
            }
        };
        cap("caps.q_cap", self.caps.q_cap > Z::from(0))?;
        cap("caps.max_paths", self.caps.max_paths > 0)?;
        cap("caps.max_grid_nodes", self.caps.max_grid_nodes > 0)?;
        cap("wiener.paths", self.wiener.paths > 0)?;
        cap("wiener.shift_paths", self.wiener.shift_paths > 0)?;
        cap("kronecker.targets", self.kronecker.targets > 0)?;
        cap("conjugacy.volume_samples", self.conjugacy.volume_samples > 0)?;
        self.policy
            .validate()
            .map_err(|e| CliError::Config(format!("policy: {e}")))?;
        for (what, n) in [
            ("wiener.paths", self.wiener.paths),
            ("wiener.shift_paths", self.wiener.shift_paths),
        ] {
            if n > self.caps.max_paths {
                return Err(CliError::Infeasible {
                    cap: "caps.max_paths".into(),
                    detail: format!("{what} = {n} exceeds {}", self.caps.max_paths),
                    hint: format!("lower {what} or raise caps.max_paths"),
                });
            }
        }
        Ok(())
    }

    /// SHA-256 of the JSON form with the output directory cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
