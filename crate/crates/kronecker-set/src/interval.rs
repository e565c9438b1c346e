use std::fmt;

use gk_base::rational::serde_str;
use gk_base::{fmt_q, frac, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// A finite union of half-open intervals `[a, b)` inside `[0, 1)`.
///
/// The list is kept sorted, disjoint and with no two intervals touching, so
/// equal sets have equal representations. Read as a subset of the circle,
/// an arc crossing `0` is stored as two pieces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    #[serde(with = "serde_str::rat")]
    pub lo: Q,
    #[serde(with = "serde_str::rat")]
    pub hi: Q,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn full() -> Self {
        IntervalSet {
            intervals: vec![Span {
                lo: Q::zero(),
                hi: Q::one(),
            }],
        }
    }

    /// Normalises a list of `[a, b)` with `0 ≤ a ≤ b ≤ 1`. Empty pieces are
    /// dropped. Panics on endpoints outside `[0, 1]` or `a > b`.
    pub fn from_intervals<I: IntoIterator<Item = (Q, Q)>>(it: I) -> Self {
        let mut v: Vec<Span> = it
            .into_iter()
            .filter(|(a, b)| {
                assert!(
                    !a.is_negative() && a <= b && b <= &Q::one(),
                    "interval [{a}, {b}) is not inside [0, 1]"
                );
                a < b
            })
            .map(|(lo, hi)| Span { lo, hi })
            .collect();
        v.sort_by(|x, y| x.lo.cmp(&y.lo));
        let mut out: Vec<Span> = Vec::with_capacity(v.len());
        for s in v {
            match out.last_mut() {
                Some(last) if s.lo <= last.hi => {
                    if s.hi > last.hi {
                        last.hi = s.hi;
                    }
                }
                _ => out.push(s),
            }
        }
        IntervalSet { intervals: out }
    }

    /// The arc `[start, start + len)` on the circle.
    pub fn arc(start: &Q, len: &Q) -> Self {
        Self::from_arcs([(start.clone(), len.clone())])
    }

    pub fn from_arcs<I: IntoIterator<Item = (Q, Q)>>(it: I) -> Self {
        let mut pieces = Vec::new();
        for (start, len) in it {
            assert!(!len.is_negative(), "negative arc length {len}");
            if len >= Q::one() {
                return Self::full();
            }
            let s = frac(&start);
            let e = &s + &len;
            if e <= Q::one() {
                pieces.push((s, e));
            } else {
                pieces.push((Q::zero(), e - Q::one()));
                pieces.push((s, Q::one()));
            }
        }
        Self::from_intervals(pieces)
    }

    pub fn spans(&self) -> &[Span] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> Q {
        self.intervals
            .iter()
            .fold(Q::zero(), |acc, s| acc + (&s.hi - &s.lo))
    }

    /// Membership of `x` reduced mod 1.
    pub fn contains(&self, x: &Q) -> bool {
        let x = frac(x);
        // First span with lo > x; the candidate is the one before it.
        let idx = self.intervals.partition_point(|s| s.lo <= x);
        idx > 0 && x < self.intervals[idx - 1].hi
    }

    fn combine(&self, other: &Self, keep: impl Fn(bool, bool) -> bool) -> Self {
        let mut cuts: Vec<&Q> =
            Vec::with_capacity(2 * (self.intervals.len() + other.intervals.len()) + 2);
        for s in self.intervals.iter().chain(&other.intervals) {
            cuts.push(&s.lo);
            cuts.push(&s.hi);
        }
        let zero = Q::zero();
        let one = Q::one();
        cuts.push(&zero);
        cuts.push(&one);
        cuts.sort();
        cuts.dedup();
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            // Membership is constant on each elementary piece; test its left end.
            if keep(self.contains_raw(w[0]), other.contains_raw(w[0])) {
                pieces.push((w[0].clone(), w[1].clone()));
            }
        }
        Self::from_intervals(pieces)
    }

    fn contains_raw(&self, x: &Q) -> bool {
        let idx = self.intervals.partition_point(|s| &s.lo <= x);
        idx > 0 && x < &self.intervals[idx - 1].hi
    }

    pub fn union(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self::full().difference(self)
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// The image under the rotation `x ↦ x + theta` mod 1.
    pub fn rotate(&self, theta: &Q) -> Self {
        Self::from_arcs(
            self.intervals
                .iter()
                .map(|s| (&s.lo + theta, &s.hi - &s.lo)),
        )
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (i, s) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {})", fmt_q(&s.lo), fmt_q(&s.hi))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gk_base::q;

    #[test]
    fn merges_touching() {
        let s = IntervalSet::from_intervals([(q(0, 1), q(1, 4)), (q(1, 4), q(1, 2))]);
        assert_eq!(s.spans().len(), 1);
        assert_eq!(s.measure(), q(1, 2));
    }

    #[test]
    fn arc_wraps() {
        let s = IntervalSet::arc(&q(3, 4), &q(1, 2));
        assert_eq!(s.to_string(), "[0, 1/4) ∪ [3/4, 1)");
        assert!(s.contains(&q(0, 1)));
        assert!(!s.contains(&q(1, 4)));
        assert!(s.contains(&q(7, 4)));
    }

    #[test]
    fn boolean_ops() {
        let a = IntervalSet::from_intervals([(q(0, 1), q(1, 2))]);
        let b = IntervalSet::from_intervals([(q(1, 4), q(3, 4))]);
        assert_eq!(a.intersection(&b).measure(), q(1, 4));
        assert_eq!(a.union(&b).measure(), q(3, 4));
        assert_eq!(
            a.difference(&b),
            IntervalSet::from_intervals([(q(0, 1), q(1, 4))])
        );
        assert_eq!(
            a.complement(),
            IntervalSet::from_intervals([(q(1, 2), q(1, 1))])
        );
        assert_eq!(b.rotate(&q(1, 2)), IntervalSet::arc(&q(3, 4), &q(1, 2)));
    }
}
