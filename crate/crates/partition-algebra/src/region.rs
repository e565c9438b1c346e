use gk_base::Q;
use kronecker_set::IntervalSet;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// A finite union of pairwise disjoint product boxes in a torus of fixed
/// dimension. Each box is one [`IntervalSet`] per axis.
///
/// Constructors that take raw boxes trust the caller on disjointness. Every
/// operation here preserves it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    dim: usize,
    boxes: Vec<Vec<IntervalSet>>,
}

impl Region {
    pub fn empty(dim: usize) -> Self {
        Region { dim, boxes: Vec::new() }
    }

    pub fn full(dim: usize) -> Self {
        Region {
            dim,
            boxes: vec![vec![IntervalSet::full(); dim]],
        }
    }

    /// A single box. Empty sides give the empty region.
    pub fn cuboid(sides: Vec<IntervalSet>) -> Self {
        let dim = sides.len();
        if sides.iter().any(IntervalSet::is_empty) {
            return Region::empty(dim);
        }
        Region {
            dim,
            boxes: vec![sides],
        }
    }

    /// Boxes assumed pairwise disjoint.
    pub fn from_disjoint(dim: usize, boxes: Vec<Vec<IntervalSet>>) -> Self {
        debug_assert!(boxes.iter().all(|b| b.len() == dim));
        Region {
            dim,
            boxes: boxes
                .into_iter()
                .filter(|b| !b.iter().any(IntervalSet::is_empty))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[Vec<IntervalSet>] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn measure(&self) -> Q {
        self.boxes
            .iter()
            .map(|b| b.iter().fold(Q::one(), |acc, s| acc * s.measure()))
            .fold(Q::zero(), |acc, m| acc + m)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &other.boxes {
                let side: Vec<IntervalSet> =
                    a.iter().zip(b).map(|(x, y)| x.intersection(y)).collect();
                if !side.iter().any(IntervalSet::is_empty) {
                    boxes.push(side);
                }
            }
        }
        Region {
            dim: self.dim,
            boxes,
        }
    }

    /// Union with a region known to be disjoint from this one.
    pub fn disjoint_union(mut self, other: Region) -> Region {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.boxes.extend(other.boxes);
        self
    }

    /// Rotation by `amount` along `axis`.
    pub fn translate(&self, axis: usize, amount: &Q) -> Region {
        Region {
            dim: self.dim,
            boxes: self
                .boxes
                .iter()
                .map(|b| {
                    let mut b = b.clone();
                    b[axis] = b[axis].rotate(amount);
                    b
                })
                .collect(),
        }
    }

    /// Set equality. Both sides are finite unions of half-open boxes, so a
    /// null symmetric difference means an empty one.
    pub fn same_set(&self, other: &Region) -> bool {
        let m = self.measure();
        m == other.measure() && self.intersection(other).measure() == m
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.intersection(other).measure() == self.measure()
    }

    pub fn contains(&self, point: &[Q]) -> bool {
        self.boxes
            .iter()
            .any(|b| b.iter().zip(point).all(|(s, x)| s.contains(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gk_base::q;

    fn arc(lo: (i64, i64), len: (i64, i64)) -> IntervalSet {
        IntervalSet::arc(&q(lo.0, lo.1), &q(len.0, len.1))
    }

    #[test]
    fn product_measure_and_rotation() {
        let r = Region::cuboid(vec![arc((0, 1), (1, 3)), arc((1, 2), (1, 4))]);
        assert_eq!(r.measure(), q(1, 12));
        let s = r.translate(0, &q(5, 6));
        assert_eq!(s.measure(), q(1, 12));
        assert!(s.contains(&[q(11, 12), q(1, 2)]));
        assert!(s.contains(&[q(1, 12), q(1, 2)]));
        assert!(!s.contains(&[q(1, 6), q(1, 2)]));
        assert_eq!(r.intersection(&s).measure(), q(1, 24));
        assert!(r.intersection(&s.translate(0, &q(1, 2))).is_empty());
        assert!(!r.same_set(&s));
        assert!(r.same_set(&s.translate(0, &q(1, 6))));
    }
}
