use std::collections::HashSet;

use gk_base::{frac, Q, Z};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::TorusError;

/// A point of `T^t` with exact coordinates in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusVector {
    #[serde(with = "gk_base::rational::serde_str::rat_vec")]
    coords: Vec<Q>,
}

impl TorusVector {
    pub fn new(coords: Vec<Q>) -> Self {
        TorusVector {
            coords: coords.iter().map(frac).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Q] {
        &self.coords
    }

    pub fn scale(&self, k: &Z) -> TorusVector {
        let kq = Q::from_integer(k.clone());
        TorusVector::new(self.coords.iter().map(|c| c * &kq).collect())
    }
}

/// The vector `(p/q)·(b_0, …, b_(t−1))` of a stage.
pub fn stage_vector(stage: &StageParams) -> TorusVector {
    let r = Q::new(stage.p.clone(), stage.q.clone());
    TorusVector::new(
        stage
            .b
            .iter()
            .map(|b| &r * Q::from_integer(b.clone()))
            .collect(),
    )
}

/// Largest orbit materialised by [`orbit`].
pub const ORBIT_CAP: u64 = 5_000_000;

/// The points `k·vec mod 1` for `k = 0..q`, in order of first appearance.
pub fn orbit(vec: &TorusVector, q: &Z) -> Result<Vec<TorusVector>, TorusError> {
    let qn = q
        .to_u64()
        .filter(|&x| x >= 1)
        .ok_or_else(|| TorusError::Precondition(format!("q = {q} must be in 1..2^64")))?;
    if qn > ORBIT_CAP {
        return Err(TorusError::Budget(format!(
            "orbit of length {qn} exceeds cap {ORBIT_CAP}"
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut cur = TorusVector::new(vec![Q::zero(); vec.dim()]);
    for _ in 0..qn {
        if seen.insert(cur.clone()) {
            out.push(cur.clone());
        } else if cur.coords.iter().all(|c| c.is_zero()) {
            // Back at the origin: the rest repeats.
            break;
        }
        cur = TorusVector::new(
            cur.coords
                .iter()
                .zip(&vec.coords)
                .map(|(a, b)| a + b)
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gk_base::q;

    fn tv(c: &[(i64, i64)]) -> TorusVector {
        TorusVector::new(c.iter().map(|&(n, d)| q(n, d)).collect())
    }

    #[test]
    fn half_on_circle() {
        let o = orbit(&tv(&[(1, 2)]), &Z::from(2)).unwrap();
        assert_eq!(o, vec![tv(&[(0, 1)]), tv(&[(1, 2)])]);
    }

    #[test]
    fn thirds_on_plane() {
        let o = orbit(&tv(&[(1, 3), (2, 3)]), &Z::from(3)).unwrap();
        assert_eq!(
            o,
            vec![
                tv(&[(0, 1), (0, 1)]),
                tv(&[(1, 3), (2, 3)]),
                tv(&[(2, 3), (1, 3)])
            ]
        );
    }

    #[test]
    fn fixed_point() {
        assert_eq!(
            orbit(&tv(&[(0, 1)]), &Z::from(5)).unwrap(),
            vec![tv(&[(0, 1)])]
        );
    }

    #[test]
    fn reduces_mod_one() {
        assert_eq!(tv(&[(7, 3)]), tv(&[(1, 3)]));
        assert_eq!(tv(&[(-1, 4)]), tv(&[(3, 4)]));
    }
}
