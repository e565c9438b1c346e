use gk_base::rational::serde_str;
use gk_base::{frac, q, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::{level_lefts, IntervalSet, KroneckerError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "serde_str::rat")]
    pub position: Q,
    #[serde(with = "serde_str::rat")]
    pub weight: Q,
}

/// A probability measure with finitely many atoms on `[0, 1)`.
/// Positions are sorted and distinct; coinciding atoms are merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    /// Positions are reduced mod 1. Weights must be positive and sum to 1.
    pub fn new<I: IntoIterator<Item = (Q, Q)>>(atoms: I) -> Result<Self, KroneckerError> {
        let mut v: Vec<Atom> = Vec::new();
        for (p, w) in atoms {
            if !w.is_positive() {
                return Err(KroneckerError::InvalidMeasure(format!(
                    "weight {w} is not positive"
                )));
            }
            v.push(Atom {
                position: frac(&p),
                weight: w,
            });
        }
        v.sort_by(|a, b| a.position.cmp(&b.position));
        let mut out: Vec<Atom> = Vec::with_capacity(v.len());
        for a in v {
            match out.last_mut() {
                Some(l) if l.position == a.position => l.weight += a.weight,
                _ => out.push(a),
            }
        }
        let total = out.iter().fold(Q::zero(), |s, a| s + &a.weight);
        if !total.is_one() {
            return Err(KroneckerError::InvalidMeasure(format!(
                "weights sum to {total}"
            )));
        }
        Ok(AtomicMeasure { atoms: out })
    }

    /// Equal weights on the given positions.
    pub fn uniform(positions: &[Q]) -> Result<Self, KroneckerError> {
        let n = positions.len() as i64;
        if n == 0 {
            return Err(KroneckerError::InvalidMeasure("no atoms".into()));
        }
        Self::new(positions.iter().map(|p| (p.clone(), q(1, n))))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// The symmetric measure `γ(A) = (σ(A ∩ [0,1/2]) + σ(−A ∩ [0,1/2]))/2`,
    /// with `−x` represented as `1 − x`. Needs every atom in `[0, 1/2]`.
    pub fn symmetrized(&self) -> Result<Self, KroneckerError> {
        let half = q(1, 2);
        if let Some(a) = self.atoms.iter().find(|a| a.position > half) {
            return Err(KroneckerError::InvalidMeasure(format!(
                "atom at {} is outside [0, 1/2]",
                a.position
            )));
        }
        let two = Q::from_integer(2.into());
        Self::new(self.atoms.iter().flat_map(|a| {
            let w = &a.weight / &two;
            [(a.position.clone(), w.clone()), (-a.position.clone(), w)]
        }))
    }
}

/// Uniform measure `σ_n` on the left endpoints `(p_n/q_n) b_n(i)` of a stage.
pub fn stage_measure(stage: &StageParams) -> Result<AtomicMeasure, KroneckerError> {
    AtomicMeasure::uniform(&level_lefts(stage))
}

pub fn max_atom_weight(m: &AtomicMeasure) -> Q {
    m.atoms
        .iter()
        .map(|a| a.weight.clone())
        .max()
        .unwrap_or_else(Q::zero)
}

/// Every atom lies in every given set.
pub fn support_contained(levels: &[IntervalSet], m: &AtomicMeasure) -> bool {
    m.atoms
        .iter()
        .all(|a| levels.iter().all(|l| l.contains(&a.position)))
}
