use gk_base::rational::serde_str;
use gk_base::Z;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::{GrowthPolicy, StageError, StageParams};

/// The pair `(v, e)` perturbing the repeated weights of the parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(with = "serde_str::int_vec")]
    pub v: Vec<Z>,
    #[serde(with = "serde_str::int")]
    pub e: Z,
}

impl Perturbation {
    pub fn trivial(t: usize) -> Self {
        Perturbation {
            v: vec![Z::zero(); t],
            e: Z::zero(),
        }
    }

    pub fn v_norm(&self) -> Z {
        self.v.iter().map(|x| x.abs()).max().unwrap_or_else(Z::zero)
    }
}

/// Intermediate values of one step, kept for the reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    #[serde(with = "serde_str::int")]
    pub d: Z,
    #[serde(with = "serde_str::int")]
    pub r_conv: Z,
    /// `p_(n+1) − p_n · q_(n+1)/q_n`.
    #[serde(with = "serde_str::int")]
    pub p_offset: Z,
    #[serde(with = "serde_str::int_vec")]
    pub c: Vec<Z>,
    pub r_t: u32,
}

/// `b̃`: each parent weight repeated `t_next / t` times.
pub fn expand_b(prev: &StageParams, t_next: usize) -> Vec<Z> {
    let rep = t_next / prev.t;
    prev.b
        .iter()
        .flat_map(|x| std::iter::repeat_n(x.clone(), rep))
        .collect()
}

/// `b(n+1) = q_n v + (e q_n + 1) b̃`.
pub fn perturbed_b(prev: &StageParams, t_next: usize, pert: &Perturbation) -> Vec<Z> {
    let bt = expand_b(prev, t_next);
    let f = &pert.e * &prev.q + Z::one();
    bt.iter()
        .zip(&pert.v)
        .map(|(bi, vi)| &prev.q * vi + &f * bi)
        .collect()
}

fn parent_of(i: usize, t: usize, t_next: usize) -> usize {
    i * t / t_next
}

fn child_s(prev: &StageParams, t_next: usize, pert: &Perturbation) -> Vec<Z> {
    (0..t_next)
        .map(|i| {
            let ip = parent_of(i, prev.t, t_next);
            &prev.s[ip] + &prev.a[ip] * (&pert.v[i] + &pert.e * &prev.b[ip])
        })
        .collect()
}

/// A perturbation is admissible when the child weights are positive with
/// `gcd = 1` and every `s_(n+1)(i)` is nonzero.
pub fn candidate_is_admissible(prev: &StageParams, t_next: usize, pert: &Perturbation) -> bool {
    if pert.v.len() != t_next || pert.e.is_negative() {
        return false;
    }
    let b = perturbed_b(prev, t_next, pert);
    if b.iter().any(|x| !x.is_positive()) {
        return false;
    }
    if !b.iter().fold(Z::zero(), |g, x| g.gcd(x)).is_one() {
        return false;
    }
    child_s(prev, t_next, pert).iter().all(|x| !x.is_zero())
}

/// Chooses `d_(n+1)` and `p_(n+1)` for given child weights.
///
/// `d` starts at the policy floor. With `m = 1 + d Π b` and `q' = q_n m`, the
/// numerator is `p_n m + k` for the least `k ≥ 1` coprime to `q'`. The offset
/// is always upward, so each child angle lies at or to the right of its
/// parent angle. When `k/q'` exceeds `1/R_conv`, `d` is bumped.
pub fn solve_d_p(
    prev: &StageParams,
    policy: &GrowthPolicy,
    b_next: &[Z],
) -> Result<(Z, Z, Z, Z), StageError> {
    let prod: Z = b_next.iter().fold(Z::one(), |acc, x| acc * x);
    let r_conv = policy.r_conv(prev.n, &prev.q, &prod);
    let mut d = policy.d_floor(prev.n, &prev.q, b_next);
    for _ in 0..=policy.max_d_bumps {
        let m = Z::one() + &d * &prod;
        let q_next = &prev.q * &m;
        let base = &prev.p * &m;
        let mut k = Z::one();
        // k/q' ≤ 1/R_conv  ⇔  k·R_conv ≤ q'
        while &k * &r_conv <= q_next {
            if (&base + &k).gcd(&q_next).is_one() {
                return Ok((d, q_next, base + &k, r_conv));
            }
            k += 1;
        }
        d += 1;
    }
    Err(StageError::Size(format!(
        "no admissible p_(n+1) after {} increments of d",
        policy.max_d_bumps
    )))
}

/// Builds stage `n + 1` from `prev` and a perturbation.
pub fn next_stage(
    prev: &StageParams,
    policy: &GrowthPolicy,
    pert: &Perturbation,
) -> Result<StageParams, StageError> {
    next_stage_traced(prev, policy, pert).map(|(s, _)| s)
}

pub fn next_stage_traced(
    prev: &StageParams,
    policy: &GrowthPolicy,
    pert: &Perturbation,
) -> Result<(StageParams, StageTrace), StageError> {
    policy.validate()?;
    prev.validate()?;
    let r_t = policy.r_t(prev.n, &prev.q, prev.t);
    if r_t > 24 {
        return Err(StageError::Size(format!("t growth exponent {r_t} too large")));
    }
    let t_next = prev.t << r_t;
    if pert.v.len() != t_next {
        return Err(StageError::WitnessLength {
            got: pert.v.len(),
            expected: t_next,
        });
    }
    let bound = policy.r_domain(prev.n, &prev.b);
    if pert.v_norm() > bound || pert.e > bound || pert.e.is_negative() {
        return Err(StageError::WitnessBound {
            bound,
            v_norm: pert.v_norm(),
            e: pert.e.clone(),
        });
    }
    if !candidate_is_admissible(prev, t_next, pert) {
        return Err(StageError::Inadmissible(
            "child weights must be positive with gcd 1 and s nonzero".into(),
        ));
    }

    let s_next = child_s(prev, t_next, pert);
    // μ_(n+1)(i) = b_n(i') + q_n (v_i + e b_n(i')), which equals b_(n+1)(i).
    let mu: Vec<Z> = (0..t_next)
        .map(|i| {
            let ip = parent_of(i, prev.t, t_next);
            &prev.b[ip] + &prev.q * (&pert.v[i] + &pert.e * &prev.b[ip])
        })
        .collect();
    let b_next = perturbed_b(prev, t_next, pert);
    debug_assert_eq!(mu, b_next);

    let (d, q_next, p_next, r_conv) = solve_d_p(prev, policy, &mu)?;

    // c_(n+1)(i) = d s_(n+1)(i) Π_(k≠i) μ(k), via prefix/suffix products.
    let mut prefix = vec![Z::one(); t_next + 1];
    for i in 0..t_next {
        prefix[i + 1] = &prefix[i] * &mu[i];
    }
    let mut suffix = vec![Z::one(); t_next + 1];
    for i in (0..t_next).rev() {
        suffix[i] = &suffix[i + 1] * &mu[i];
    }
    let c: Vec<Z> = (0..t_next)
        .map(|i| &d * &s_next[i] * &prefix[i] * &suffix[i + 1])
        .collect();
    let a_next: Vec<Z> = (0..t_next)
        .map(|i| {
            let ip = parent_of(i, prev.t, t_next);
            &prev.a[ip] + &prev.q * &c[i]
        })
        .collect();

    for i in 0..t_next {
        if &a_next[i] * &b_next[i] != Z::one() + &s_next[i] * &q_next {
            return Err(StageError::Invalid(format!(
                "unimodularity chain broken at child {i}"
            )));
        }
    }

    let p_offset = &p_next - &prev.p * (&q_next / &prev.q);
    let st = StageParams {
        n: prev.n + 1,
        t: t_next,
        p: p_next,
        q: q_next,
        a: a_next,
        b: b_next,
        s: s_next,
    };
    st.validate()?;
    Ok((
        st,
        StageTrace {
            d,
            r_conv,
            p_offset,
            c,
            r_t,
        },
    ))
}
