//! The full run: every module in order, sequentially.

use std::path::Path;

use serde_json::json;

use crate::config::ExperimentConfig;
use crate::modules;
use crate::output::{write_json, write_module, ModuleOutput, Stamp};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_PASS};

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub modules: Vec<ModuleOutput>,
    pub stamp: Stamp,
}

impl PipelineOutcome {
    pub fn failures(&self) -> Vec<String> {
        self.modules.iter().flat_map(|m| m.failures()).collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures().is_empty() {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn stamp(cfg: &ExperimentConfig) -> Stamp {
    Stamp {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

pub fn summary(outputs: &[ModuleOutput]) -> serde_json::Value {
    json!({
        "passed": outputs.iter().all(|m| m.passed()),
        "modules": outputs.iter().map(|m| json!({
            "module": m.module,
            "checks": m.checks.len(),
            "passed": m.passed(),
            "failing": m.failures(),
        })).collect::<Vec<_>>(),
    })
}

/// Writes the config, each module report and `summary.json` into `dir`.
pub fn write_bundle(dir: &Path, cfg: &ExperimentConfig, outputs: &[ModuleOutput]) -> Result<(), CliError> {
    let st = stamp(cfg);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    let mut c = cfg.clone();
    c.out = Default::default();
    write_json(dir, "config.json", &st, &crate::output::to_value(&c)?)?;
    for m in outputs {
        write_module(dir, &st, m)?;
    }
    write_json(dir, "summary.json", &st, &summary(outputs))
}

/// Chains stage generation, torus witnesses, level sets and the Kronecker
/// search, the Wiener checks, the partition diagram and the conjugacy
/// checks. Files go to `cfg.out` unless `check_only`.
pub fn run_pipeline(cfg: &ExperimentConfig, check_only: bool) -> Result<PipelineOutcome, CliError> {
    cfg.validate()?;
    let chain = modules::build_chain(cfg)?;
    let stages: Vec<_> = chain.iter().map(|l| l.stage.clone()).collect();
    let outputs = vec![
        modules::run_stages(&chain),
        modules::run_torus(&chain)?,
        modules::run_kronecker(cfg, &chain)?,
        modules::run_wiener(cfg, &stages, None)?,
        modules::run_diagram(cfg)?,
        modules::run_conjugacy(cfg, None, None)?,
    ];
    if !check_only {
        write_bundle(&cfg.out, cfg, &outputs)?;
    }
    Ok(PipelineOutcome {
        modules: outputs,
        stamp: stamp(cfg),
    })
}
