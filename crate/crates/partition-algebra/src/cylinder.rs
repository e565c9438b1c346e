//! Cylinder sets of the circle times the cube, coordinate-wise piecewise
//! translations acting on them, and the telescoping estimate on a sequence of
//! partition distances.

use std::collections::{BTreeMap, BTreeSet};

use gk_base::{Q, Z};
use kronecker_set::IntervalSet;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::PartitionError;

/// `{(z, x) : x_k ∈ sides[k]}`, unconstrained on the missing coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cylinder {
    pub sides: BTreeMap<usize, IntervalSet>,
}

impl Cylinder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, coord: usize, side: IntervalSet) -> Self {
        self.sides.insert(coord, side);
        self
    }

    /// The coordinates on which the set is not full.
    pub fn base(&self) -> BTreeSet<usize> {
        self.sides
            .iter()
            .filter(|(_, s)| *s != &IntervalSet::full())
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn measure(&self) -> Q {
        self.sides.values().fold(Q::one(), |acc, s| acc * s.measure())
    }

    pub fn same_set(&self, other: &Cylinder) -> bool {
        let m = self.measure();
        if m.is_zero() || other.measure().is_zero() {
            return m == other.measure();
        }
        let keys: BTreeSet<usize> = self.sides.keys().chain(other.sides.keys()).copied().collect();
        let full = IntervalSet::full();
        keys.iter().all(|k| {
            self.sides.get(k).unwrap_or(&full) == other.sides.get(k).unwrap_or(&full)
        })
    }
}

/// One piece of a translation: `[lo, hi) ↦ [lo, hi) + shift` mod 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub domain: IntervalSet,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub shift: Q,
}

/// A map acting on the coordinates in `pieces` only, each by a piecewise
/// translation whose domains and images tile the circle.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JTransform {
    pub pieces: BTreeMap<usize, Vec<Piece>>,
}

fn tiles(sets: impl Iterator<Item = IntervalSet>) -> bool {
    let mut acc = IntervalSet::empty();
    let mut total = Q::zero();
    for s in sets {
        total += s.measure();
        acc = acc.union(&s);
    }
    total.is_one() && acc == IntervalSet::full()
}

impl JTransform {
    pub fn coords(&self) -> BTreeSet<usize> {
        self.pieces.keys().copied().collect()
    }

    /// Permutes the `1/q` cells of one coordinate: cell `k` goes to `perm[k]`.
    pub fn cell_permutation(coord: usize, perm: &[u64]) -> Result<Self, PartitionError> {
        let q = perm.len() as u64;
        let set: BTreeSet<u64> = perm.iter().copied().collect();
        if q == 0 || set.len() as u64 != q || set.iter().any(|&x| x >= q) {
            return Err(PartitionError::Precondition("not a permutation".into()));
        }
        let qz = Z::from(q);
        let pieces = perm
            .iter()
            .enumerate()
            .map(|(k, &img)| Piece {
                domain: IntervalSet::arc(&Q::new(Z::from(k as u64), qz.clone()), &Q::new(Z::one(), qz.clone())),
                shift: Q::new(Z::from(img) - Z::from(k as u64), qz.clone()),
            })
            .collect();
        let mut t = JTransform::default();
        t.pieces.insert(coord, pieces);
        Ok(t)
    }

    /// Domains and images tile the circle on every coordinate.
    pub fn check(&self) -> Result<(), PartitionError> {
        for (k, ps) in &self.pieces {
            if !tiles(ps.iter().map(|p| p.domain.clone())) {
                return Err(PartitionError::Invalid(format!("domains on x_{k} do not tile")));
            }
            if !tiles(ps.iter().map(|p| p.domain.rotate(&p.shift))) {
                return Err(PartitionError::Invalid(format!("images on x_{k} do not tile")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, c: &Cylinder) -> Cylinder {
        let mut out = c.clone();
        for (k, ps) in &self.pieces {
            let side = c.sides.get(k).cloned().unwrap_or_else(IntervalSet::full);
            let img = ps.iter().fold(IntervalSet::empty(), |acc, p| {
                acc.union(&side.intersection(&p.domain).rotate(&p.shift))
            });
            out.sides.insert(*k, img);
        }
        out
    }
}

/// Whether `F(c) = c`. Holds whenever `c` depends only on coordinates
/// outside those moved by `F`.
pub fn invariant_under(f: &JTransform, c: &Cylinder) -> bool {
    f.apply(c).same_set(c)
}

/// Distances `d_m` for `m = start, start+1, …` against `2^(−m)` and their sum
/// against `2^(1−start)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelescopeReport {
    pub start: u32,
    /// First `m` with `d_m > 2^(−m)`.
    pub first_violation: Option<u32>,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub tail_sum: Q,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub tail_bound: Q,
}

impl TelescopeReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none() && self.tail_sum <= self.tail_bound
    }
}

pub fn telescope(start: u32, distances: &[Q]) -> TelescopeReport {
    let pow = |m: u32| Q::new(Z::one(), Z::one() << m as usize);
    let first_violation = distances
        .iter()
        .enumerate()
        .map(|(k, d)| (start + k as u32, d))
        .find(|(m, d)| **d > pow(*m))
        .map(|(m, _)| m);
    let tail_sum = distances.iter().fold(Q::zero(), |acc, d| acc + d);
    let tail_bound = if start == 0 {
        Q::from_integer(Z::from(2))
    } else {
        pow(start - 1)
    };
    TelescopeReport {
        start,
        first_violation,
        tail_sum,
        tail_bound,
    }
}
