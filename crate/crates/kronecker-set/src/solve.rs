use gk_base::rational::serde_str;
use gk_base::{frac, par, q, torus_dist, Q, Z};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::{level_lefts, level_length, KroneckerError};

/// Largest `q_n` for which the `k` range is searched exhaustively.
pub const K_SEARCH_CAP: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KroneckerSolution {
    pub k: u64,
    /// `max_i dist(k x_i, z_i)` at the left endpoints.
    #[serde(with = "serde_str::rat")]
    pub pointwise: Q,
    /// `pointwise + k/(n q_n)`, the criterion used by the search.
    #[serde(with = "serde_str::rat")]
    pub error_bound: Q,
    /// `sup_{x ∈ L_n} dist(k x, f(x))` for the piecewise-constant `f`.
    #[serde(with = "serde_str::rat")]
    pub sup_error: Q,
}

struct Problem {
    /// `p_n b_n(i) mod q_n` for each interval.
    residues: Vec<u64>,
    q: u64,
    qq: Q,
    targets: Vec<Q>,
    len: Q,
}

fn setup(targets: &[(usize, Q)], stage: &StageParams) -> Result<Problem, KroneckerError> {
    let len = level_length(stage)?;
    let qn = stage
        .q
        .to_u64()
        .filter(|&x| x <= K_SEARCH_CAP)
        .ok_or_else(|| {
            KroneckerError::Budget(format!("q_n = {} exceeds the search cap", stage.q))
        })?;
    if targets.len() != stage.t {
        return Err(KroneckerError::Precondition(format!(
            "{} targets for {} intervals",
            targets.len(),
            stage.t
        )));
    }
    let mut z = vec![None; stage.t];
    for (i, zi) in targets {
        let slot = z.get_mut(*i).ok_or_else(|| {
            KroneckerError::Precondition(format!("interval index {i} out of range"))
        })?;
        if slot.is_some() {
            return Err(KroneckerError::Precondition(format!(
                "two targets for interval {i}"
            )));
        }
        *slot = Some(frac(zi));
    }
    let residues = stage
        .b
        .iter()
        .map(|b| {
            let r: Z = (&stage.p * b) % &stage.q;
            r.to_u64().expect("residue below q")
        })
        .collect();
    Ok(Problem {
        residues,
        q: qn,
        qq: Q::from_integer(stage.q.clone()),
        targets: z.into_iter().map(|x| x.expect("all filled")).collect(),
        len,
    })
}

impl Problem {
    fn point(&self, k: u64, i: usize) -> Q {
        let r = (k as u128 * self.residues[i] as u128 % self.q as u128) as u64;
        Q::from_integer(Z::from(r)) / &self.qq
    }

    fn pointwise(&self, k: u64) -> Q {
        (0..self.targets.len())
            .map(|i| torus_dist(&self.point(k, i), &self.targets[i]))
            .max()
            .unwrap_or_else(Q::zero)
    }

    fn bound(&self, k: u64) -> Q {
        self.pointwise(k) + &self.len * Q::from_integer(Z::from(k))
    }

    /// Sup over `δ ∈ [0, len)` of `dist(k(x_i + δ), z_i)`, maximised over `i`.
    fn sup_error(&self, k: u64) -> Q {
        let spread = &self.len * Q::from_integer(Z::from(k));
        let half = q(1, 2);
        (0..self.targets.len())
            .map(|i| {
                if spread >= Q::from_integer(Z::from(1)) {
                    return half.clone();
                }
                // The displacement sweeps [c, c + spread) mod 1.
                let c = frac(&(self.point(k, i) - &self.targets[i]));
                let end = &c + &spread;
                let crosses_half = (c <= half && end > half) || end > q(3, 2);
                if crosses_half {
                    half.clone()
                } else {
                    torus_dist(&c, &Q::zero()).max(torus_dist(&end, &Q::zero()))
                }
            })
            .max()
            .unwrap_or_else(Q::zero)
    }

    fn solution(&self, k: u64) -> KroneckerSolution {
        let pointwise = self.pointwise(k);
        let error_bound = &pointwise + &self.len * Q::from_integer(Z::from(k));
        KroneckerSolution {
            k,
            pointwise,
            error_bound,
            sup_error: self.sup_error(k),
        }
    }
}

const CHUNK: u64 = 256;

/// Smallest `k ∈ [0, q_n)` with `max_i dist(k x_i, z_i) + k/(n q_n) ≤ tol`,
/// where `x_i` are the left endpoints of the level intervals. Then
/// `|k x − z_i| ≤ tol` on the whole interval `i`.
pub fn kronecker_solve(
    targets: &[(usize, Q)],
    stage: &StageParams,
    tol: &Q,
) -> Result<KroneckerSolution, KroneckerError> {
    let pr = setup(targets, stage)?;
    if tol < &Q::new(Z::from(2), Z::from(stage.n)) {
        return Err(KroneckerError::Precondition(format!(
            "tolerance {tol} is below 2/n = 2/{}",
            stage.n
        )));
    }
    let n = pr.q as usize;
    match par::find_first(n, |k| pr.bound(k as u64) <= *tol) {
        Some(k) => Ok(pr.solution(k as u64)),
        None => {
            let best = best_k(&pr);
            Err(KroneckerError::NoSolution {
                best: Box::new(pr.solution(best)),
            })
        }
    }
}

/// The `k` minimising `max_i dist(k x_i, z_i) + k/(n q_n)`, smallest on ties.
pub fn kronecker_best(
    targets: &[(usize, Q)],
    stage: &StageParams,
) -> Result<KroneckerSolution, KroneckerError> {
    let pr = setup(targets, stage)?;
    Ok(pr.solution(best_k(&pr)))
}

/// The `k` minimising the pointwise error alone, smallest on ties.
pub fn kronecker_nearest(
    targets: &[(usize, Q)],
    stage: &StageParams,
) -> Result<KroneckerSolution, KroneckerError> {
    let pr = setup(targets, stage)?;
    Ok(pr.solution(argmin(&pr, |k| pr.pointwise(k))))
}

fn best_k(pr: &Problem) -> u64 {
    argmin(pr, |k| pr.bound(k))
}

fn argmin(pr: &Problem, f: impl Fn(u64) -> Q + Sync + Send) -> u64 {
    let chunks = pr.q.div_ceil(CHUNK) as usize;
    let local = par::map_range(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(pr.q);
        (lo..hi).map(|k| (f(k), k)).min().expect("nonempty chunk")
    });
    local.into_iter().min().map(|(_, k)| k).unwrap_or(0)
}

/// Targets `f(x_i)` sampled at the left endpoint of each level interval.
pub fn sample_targets(stage: &StageParams, f: impl Fn(&Q) -> Q) -> Vec<(usize, Q)> {
    level_lefts(stage)
        .iter()
        .enumerate()
        .map(|(i, x)| (i, frac(&f(x))))
        .collect()
}
