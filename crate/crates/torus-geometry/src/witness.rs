use gk_base::rational::serde_str;
use gk_base::{Q, Z};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::Perturbation;

use crate::{covering_radius_with, exceeds_radius, orbit, GridBudget, TorusError, TorusVector};

/// Inputs of a witness search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessQuery {
    /// Repeated parent weights `b̃`.
    pub b_tilde: Vec<Z>,
    pub q_n: Z,
    /// Largest accepted covering radius.
    pub target: Q,
    /// Box bound on `‖v‖_∞` and `e`.
    pub bound: u64,
    /// Grid resolution of the radius certificate.
    pub resolution: Q,
    pub budget: GridBudget,
}

impl WitnessQuery {
    /// A query with resolution `target / 5` and the default budget.
    pub fn new(b_tilde: Vec<Z>, q_n: Z, target: Q, bound: u64) -> Self {
        let resolution = &target / Q::from_integer(Z::from(5));
        WitnessQuery {
            b_tilde,
            q_n,
            target,
            bound,
            resolution,
            budget: GridBudget::default(),
        }
    }
}

/// An accepted perturbation with its radius certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationWitness {
    #[serde(flatten)]
    pub perturbation: Perturbation,
    /// Upper bound on the covering radius of the candidate orbit.
    #[serde(with = "serde_str::rat")]
    pub certified_diameter: Q,
    #[serde(with = "serde_str::int")]
    pub q_candidate: Z,
    #[serde(with = "serde_str::int")]
    pub p_candidate: Z,
    #[serde(with = "serde_str::rat")]
    pub resolution: Q,
    /// Candidates examined, including the accepted one.
    pub searched: u64,
}

impl TranslationWitness {
    pub fn v(&self) -> &[Z] {
        &self.perturbation.v
    }

    pub fn e(&self) -> &Z {
        &self.perturbation.e
    }
}

/// `q_n v + (e q_n + 1) b̃`.
pub fn candidate_weights(b_tilde: &[Z], q_n: &Z, pert: &Perturbation) -> Vec<Z> {
    let f = &pert.e * q_n + Z::one();
    b_tilde
        .iter()
        .zip(&pert.v)
        .map(|(b, v)| q_n * v + &f * b)
        .collect()
}

/// The orbit of `(p/q')·b` for a candidate.
pub fn candidate_orbit(b: &[Z], p: &Z, q: &Z) -> Result<Vec<TorusVector>, TorusError> {
    let r = Q::new(p.clone(), q.clone());
    let vec = TorusVector::new(b.iter().map(|x| &r * Q::from_integer(x.clone())).collect());
    orbit(&vec, q)
}

/// `q' = q_n (1 + d Π b)` with numerator `p = 1`, for searches outside a
/// stage chain.
pub fn plain_denominator(q_n: &Z, d: &Z) -> impl Fn(&Perturbation, &[Z]) -> Option<(Z, Z)> {
    let q_n = q_n.clone();
    let d = d.clone();
    move |_, b| {
        if b.iter().any(|x| !x.is_positive()) {
            return None;
        }
        let prod: Z = b.iter().product();
        Some((&q_n * (Z::one() + &d * prod), Z::one()))
    }
}

/// Searches `e = 0..=bound`, then `v ∈ [−bound, bound]^t` in lexicographic
/// order, for the first candidate whose orbit has certified covering radius
/// `≤ target`.
///
/// `denominator` maps a candidate and its weights to `(q', p')`, or `None`
/// when the candidate is not usable (it is then skipped).
pub fn find_witness<F>(
    query: &WitnessQuery,
    denominator: F,
) -> Result<TranslationWitness, TorusError>
where
    F: Fn(&Perturbation, &[Z]) -> Option<(Z, Z)>,
{
    let t = query.b_tilde.len();
    if t == 0 {
        return Err(TorusError::Empty);
    }
    if query.bound == 0 {
        return Err(TorusError::Precondition("bound must be at least 1".into()));
    }
    let g = query.b_tilde.iter().fold(Z::zero(), |g, x| g.gcd(x));
    if !g.is_one() {
        return Err(TorusError::Precondition(format!(
            "gcd of b_tilde is {g}, not 1"
        )));
    }
    if t > query.budget.max_dim {
        return Err(TorusError::DimensionCap {
            dim: t,
            cap: query.budget.max_dim,
        });
    }
    let side = 2 * query.bound + 1;
    let per_e = side
        .checked_pow(t as u32)
        .ok_or_else(|| TorusError::Budget("search box too large".into()))?;
    let mut searched = 0u64;
    let b = query.bound as i64;
    for e in 0..=query.bound {
        for idx in 0..per_e {
            // Lexicographic: the first coordinate varies slowest.
            let mut v = vec![Z::zero(); t];
            let mut rest = idx;
            for k in (0..t).rev() {
                v[k] = Z::from((rest % side) as i64 - b);
                rest /= side;
            }
            let pert = Perturbation { v, e: Z::from(e) };
            let weights = candidate_weights(&query.b_tilde, &query.q_n, &pert);
            let Some((q_c, p_c)) = denominator(&pert, &weights) else {
                continue;
            };
            searched += 1;
            let pts = match candidate_orbit(&weights, &p_c, &q_c) {
                Ok(p) => p,
                Err(TorusError::Budget(_)) => continue,
                Err(err) => return Err(err),
            };
            match exceeds_radius(&pts, &query.resolution, &query.budget, &query.target) {
                Ok(true) | Err(TorusError::Budget(_)) => continue,
                Err(err) => return Err(err),
                Ok(false) => {}
            }
            let certified = covering_radius_with(&pts, &query.resolution, &query.budget)?;
            debug_assert!(certified <= query.target);
            return Ok(TranslationWitness {
                perturbation: pert,
                certified_diameter: certified,
                q_candidate: q_c,
                p_candidate: p_c,
                resolution: query.resolution.clone(),
                searched,
            });
        }
    }
    Err(TorusError::NoWitness {
        bound: query.bound,
        searched: searched.to_u64().unwrap_or(u64::MAX),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gk_base::q;

    #[test]
    fn one_dimensional_trivial() {
        // b̃ = (1), q_n = 3, d = 1: v = −1 is skipped (weight −2), v = 0 gives
        // q' = 6 and the orbit {k/6} of radius 1/12.
        let query = WitnessQuery::new(vec![Z::from(1)], Z::from(3), q(1, 10), 1);
        let w = find_witness(&query, plain_denominator(&Z::from(3), &Z::from(1))).unwrap();
        assert_eq!(w.e(), &Z::zero());
        assert_eq!(w.q_candidate, Z::from(6));
        assert_eq!(w.searched, 1);
        assert!(w.certified_diameter >= q(1, 12) && w.certified_diameter <= q(1, 10));
    }

    #[test]
    fn gcd_precondition() {
        let query = WitnessQuery::new(vec![Z::from(2), Z::from(4)], Z::from(1), q(1, 4), 3);
        assert!(matches!(
            find_witness(&query, plain_denominator(&Z::from(1), &Z::from(1))),
            Err(TorusError::Precondition(_))
        ));
    }

    #[test]
    fn exhausted() {
        let query = WitnessQuery::new(vec![Z::from(1)], Z::from(1), q(1, 1000), 1);
        let err = find_witness(&query, |_, _| Some((Z::from(2), Z::one()))).unwrap_err();
        assert!(matches!(err, TorusError::NoWitness { bound: 1, .. }));
    }
}
