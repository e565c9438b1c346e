use gk_base::{Q, Z};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::{GrowthPolicy, StageError, StageParams};

/// Outcome of the five arithmetic conditions for a stage (and its parent).
///
/// Conditions that relate a stage to its parent are reported `true` when no
/// parent is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: u32,
    /// `t_(n+1) / t_n = 2^R_t`.
    pub temporal: bool,
    /// `a b − s q = 1` for every index, and `gcd(p, q) = 1`.
    pub primality: bool,
    /// `q_n | q_(n+1)`.
    pub monotonicity: bool,
    /// `q_n | a_(n+1)(i) − a_n(i')` for every child `i` of `i'`.
    pub isomorphism: bool,
    /// `0 < |p_(n+1)/q_(n+1) − p_n/q_n| ≤ 1/R_conv`.
    pub convergence: bool,
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.temporal && self.primality && self.monotonicity && self.isomorphism && self.convergence
    }

    pub fn as_array(&self) -> [bool; 5] {
        [
            self.temporal,
            self.primality,
            self.monotonicity,
            self.isomorphism,
            self.convergence,
        ]
    }
}

fn primality_holds(s: &StageParams) -> bool {
    s.a.len() == s.t
        && s.b.len() == s.t
        && s.s.len() == s.t
        && s.p.gcd(&s.q).is_one()
        && (0..s.t).all(|i| &s.a[i] * &s.b[i] - &s.s[i] * &s.q == Z::one())
}

/// Re-verifies conditions 1–5 with exact integers and rationals.
pub fn check_stage(
    s: &StageParams,
    prev: Option<&StageParams>,
    policy: &GrowthPolicy,
) -> Result<ConditionReport, StageError> {
    let primality = primality_holds(s);
    let Some(pr) = prev else {
        return Ok(ConditionReport {
            n: s.n,
            temporal: true,
            primality,
            monotonicity: true,
            isomorphism: true,
            convergence: true,
        });
    };
    if pr.n + 1 != s.n {
        return Err(StageError::IndexMismatch {
            parent: pr.n,
            child: s.n,
        });
    }
    let r_t = policy.r_t(pr.n, &pr.q, pr.t);
    let temporal = r_t < 64 && pr.t.checked_shl(r_t) == Some(s.t);
    let monotonicity = pr.q.is_positive() && (&s.q % &pr.q).is_zero();
    let isomorphism = temporal
        && (0..s.t).all(|i| {
            let ip = i * pr.t / s.t;
            ((&s.a[i] - &pr.a[ip]) % &pr.q).is_zero()
        });
    let delta = Q::new(s.p.clone(), s.q.clone()) - Q::new(pr.p.clone(), pr.q.clone());
    let r_conv = policy.r_conv(pr.n, &pr.q, &s.prod_b());
    let convergence = !delta.is_zero() && delta.abs() * Q::from_integer(r_conv) <= Q::one();
    Ok(ConditionReport {
        n: s.n,
        temporal,
        primality,
        monotonicity,
        isomorphism,
        convergence,
    })
}
