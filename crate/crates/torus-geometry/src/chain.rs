//! Stage chains whose perturbations come from the witness search.

use gk_base::rational::serde_str;
use gk_base::{Q, Z};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use stage_gen::{
    candidate_is_admissible, check_stage, expand_b, init_stage, next_stage_traced, solve_d_p,
    ConditionReport, GrowthPolicy, Perturbation, StageParams, StageTrace,
};

use crate::{
    covering_radius_with, find_witness, orbit, stage_vector, GridBudget, TorusError,
    TranslationWitness, WitnessQuery,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WitnessConfig {
    /// Transitions into `t_(n+1)` above this use [`spread_perturbation`].
    pub max_dim: usize,
    /// Grid resolution as a fraction of the target radius.
    pub resolution_divisor: u64,
    pub budget: GridBudget,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            max_dim: 2,
            resolution_divisor: 5,
            budget: GridBudget::default(),
        }
    }
}

/// Target covering radius for the step out of stage `n`.
pub fn witness_target(n: u32) -> Q {
    Q::new(Z::from(1), Z::from(2 * (n as u64 + 1)))
}

/// Radius certificate of a stage vector: `radius` bounds the covering radius
/// of the orbit of `(p_n/q_n) b_n`, and `holds` records `2·radius < 1/n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition6 {
    #[serde(with = "serde_str::rat")]
    pub radius: Q,
    #[serde(with = "serde_str::rat")]
    pub resolution: Q,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub stage: StageParams,
    /// `None` for stage 0.
    pub trace: Option<StageTrace>,
    /// `None` when the spread perturbation was used.
    pub witness: Option<TranslationWitness>,
    pub report: ConditionReport,
    /// `None` when the stage dimension is above the grid cap.
    pub condition6: Option<Condition6>,
}

/// Certifies condition 6 for one stage, or `None` when `t_n` is above
/// the grid cap or the orbit is too long.
pub fn certify_condition6(
    stage: &StageParams,
    cfg: &WitnessConfig,
) -> Result<Option<Condition6>, TorusError> {
    if stage.n == 0 || stage.t > cfg.max_dim.min(cfg.budget.max_dim) {
        return Ok(None);
    }
    let resolution = witness_target(stage.n - 1) / Q::from_integer(Z::from(cfg.resolution_divisor));
    let pts = match orbit(&stage_vector(stage), &stage.q) {
        Ok(p) => p,
        Err(TorusError::Budget(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let radius = match covering_radius_with(&pts, &resolution, &cfg.budget) {
        Ok(r) => r,
        Err(TorusError::Budget(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let holds = Q::from_integer(Z::from(2)) * &radius < Q::new(Z::from(1), Z::from(stage.n));
    Ok(Some(Condition6 {
        radius,
        resolution,
        holds,
    }))
}

/// A perturbation that gives the children of each parent distinct weights
/// without a search: child `j` of its parent gets `v = j − e` with the least
/// `e` that keeps `v` inside the bound and the weights positive.
///
/// Falls back to the trivial perturbation when the siblings do not fit in
/// the box or the result is not admissible.
pub fn spread_perturbation(prev: &StageParams, t_next: usize, bound: u64) -> Perturbation {
    let rep = (t_next / prev.t) as u64;
    let trivial = Perturbation::trivial(t_next);
    // v ranges over [−e, rep − 1 − e] and needs e ≤ bound, rep − 1 − e ≤ bound.
    let e = (rep - 1).saturating_sub(bound);
    if e > bound {
        return trivial;
    }
    let pert = Perturbation {
        v: (0..t_next as u64)
            .map(|i| Z::from(i % rep) - Z::from(e))
            .collect(),
        e: Z::from(e),
    };
    if candidate_is_admissible(prev, t_next, &pert) {
        pert
    } else {
        trivial
    }
}

/// One step: searches a witness when `t_(n+1) ≤ max_dim`, else uses
/// [`spread_perturbation`].
pub fn extend(
    prev: &StageParams,
    policy: &GrowthPolicy,
    cfg: &WitnessConfig,
) -> Result<ChainLink, TorusError> {
    let r_t = policy.r_t(prev.n, &prev.q, prev.t);
    let t_next = prev.t << r_t;
    let bound = policy
        .r_domain(prev.n, &prev.b)
        .to_u64()
        .ok_or_else(|| TorusError::Precondition("search bound does not fit in 64 bits".into()))?;
    let (pert, witness) = if t_next <= cfg.max_dim {
        let target = witness_target(prev.n);
        let mut query = WitnessQuery::new(expand_b(prev, t_next), prev.q.clone(), target, bound);
        query.resolution = &query.target / Q::from_integer(Z::from(cfg.resolution_divisor));
        query.budget = cfg.budget.clone();
        let w = find_witness(&query, |pert: &Perturbation, b: &[Z]| {
            if !candidate_is_admissible(prev, t_next, pert) {
                return None;
            }
            solve_d_p(prev, policy, b).ok().map(|(_, q, p, _)| (q, p))
        })?;
        (w.perturbation.clone(), Some(w))
    } else {
        (spread_perturbation(prev, t_next, bound), None)
    };
    let (stage, trace) = next_stage_traced(prev, policy, &pert)?;
    let report = check_stage(&stage, Some(prev), policy)?;
    let condition6 = certify_condition6(&stage, cfg)?;
    Ok(ChainLink {
        stage,
        trace: Some(trace),
        witness,
        report,
        condition6,
    })
}

/// Stages `0..=n_stages`.
pub fn build_chain(
    policy: &GrowthPolicy,
    cfg: &WitnessConfig,
    n_stages: u32,
) -> Result<Vec<ChainLink>, TorusError> {
    let s0 = init_stage();
    let report = check_stage(&s0, None, policy)?;
    let mut out = vec![ChainLink {
        stage: s0,
        trace: None,
        witness: None,
        report,
        condition6: None,
    }];
    for _ in 0..n_stages {
        let prev = &out.last().expect("nonempty").stage;
        let link = extend(prev, policy, cfg)?;
        out.push(link);
    }
    Ok(out)
}
