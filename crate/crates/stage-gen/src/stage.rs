use gk_base::rational::serde_str;
use gk_base::Z;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::StageError;

/// One stage of the construction. Index families are stored in order
/// `i = 0..t`, standing for the points `i/t` of the circle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageParams {
    pub n: u32,
    pub t: usize,
    #[serde(with = "serde_str::int")]
    pub p: Z,
    #[serde(with = "serde_str::int")]
    pub q: Z,
    #[serde(with = "serde_str::int_vec")]
    pub a: Vec<Z>,
    #[serde(with = "serde_str::int_vec")]
    pub b: Vec<Z>,
    #[serde(with = "serde_str::int_vec")]
    pub s: Vec<Z>,
}

/// Stage 0: `t = p = q = 1`, `a = [2]`, `b = s = [1]`.
pub fn init_stage() -> StageParams {
    StageParams {
        n: 0,
        t: 1,
        p: Z::one(),
        q: Z::one(),
        a: vec![Z::from(2)],
        b: vec![Z::one()],
        s: vec![Z::one()],
    }
}

impl StageParams {
    /// Builds a stage from a rotation `p/q` and a weight vector `b`, solving
    /// `a·b − s·q = 1` with `1 ≤ a ≤ q` (or `a = 2` when `q = 1`).
    pub fn from_rotation(n: u32, p: Z, q: Z, b: Vec<Z>) -> Result<Self, StageError> {
        if !q.is_positive() {
            return Err(StageError::Invalid("q must be positive".into()));
        }
        let mut a = Vec::with_capacity(b.len());
        let mut s = Vec::with_capacity(b.len());
        for bi in &b {
            let g = bi.extended_gcd(&q);
            if !g.gcd.is_one() {
                return Err(StageError::Invalid(format!("gcd(b = {bi}, q = {q}) != 1")));
            }
            let mut ai = g.x.mod_floor(&q);
            if ai.is_zero() {
                ai += &q;
            }
            while ai.clone() * bi - Z::one() == Z::zero() {
                // s would vanish (only possible for q = 1, b = 1).
                ai += &q;
            }
            let si = (ai.clone() * bi - Z::one()) / &q;
            a.push(ai);
            s.push(si);
        }
        let st = StageParams {
            n,
            t: b.len(),
            p,
            q,
            a,
            b,
            s,
        };
        st.validate()?;
        Ok(st)
    }

    /// Checks the per-stage invariants.
    pub fn validate(&self) -> Result<(), StageError> {
        let bad = |m: String| Err(StageError::Invalid(m));
        if self.t == 0 || !self.t.is_power_of_two() {
            return bad(format!("t = {} is not a power of 2", self.t));
        }
        if self.a.len() != self.t || self.b.len() != self.t || self.s.len() != self.t {
            return bad("family lengths differ from t".into());
        }
        if !self.q.is_positive() || !self.p.is_positive() {
            return bad("p and q must be positive".into());
        }
        if !self.p.gcd(&self.q).is_one() {
            return bad(format!("gcd(p, q) != 1 for p = {}, q = {}", self.p, self.q));
        }
        for i in 0..self.t {
            if !self.b[i].is_positive() {
                return bad(format!("b[{i}] is not positive"));
            }
            if self.s[i].is_zero() {
                return bad(format!("s[{i}] is zero"));
            }
            if self.a[i].clone() * &self.b[i] - self.s[i].clone() * &self.q != Z::one() {
                return bad(format!("a·b − s·q != 1 at index {i}"));
            }
        }
        Ok(())
    }

    /// Index `i'` of the parent point containing child `i` when the parent
    /// has `t_prev` points.
    pub fn parent_index(&self, i: usize, t_prev: usize) -> usize {
        i * t_prev / self.t
    }

    pub fn prod_b(&self) -> Z {
        self.b.iter().fold(Z::one(), |acc, x| acc * x)
    }

    pub fn b_max(&self) -> Z {
        self.b.iter().max().cloned().unwrap_or_else(Z::one)
    }

    /// `gcd` of the `b` family.
    pub fn b_gcd(&self) -> Z {
        self.b.iter().fold(Z::zero(), |g, x| g.gcd(x))
    }
}
