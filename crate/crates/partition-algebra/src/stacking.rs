use gk_base::{Q, Z};
use kronecker_set::IntervalSet;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::PartitionError;

/// Largest `q · v` for which every start of a slice is checked against the
/// brute-force realization.
pub const STACK_CHECK_CAP: u64 = 20_000_000;

/// One stacked slice `l`: it starts at `(k v + r)/q = l a/q` and covers
/// `count` consecutive cells of width `1/q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackSlice {
    pub l: u64,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub k: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub r: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub count: Z,
    pub span: IntervalSet,
}

/// Slices of `{(j0 + s) a mod q : 0 ≤ s < v}` for one child `i`, relative to
/// the start `j0 a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackingReport {
    pub child: usize,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub v: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub a: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub b: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub q: Z,
    /// `⌊(v − 1)/b⌋`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub f: Z,
    /// `v − 1 − b f`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub m: Z,
    pub slices: Vec<StackSlice>,
    /// The union of the slices, `R`.
    pub realized: IntervalSet,
    /// `v = 0`: the slice class is absent.
    pub degenerate: bool,
    /// Starts `j0` compared with the brute-force set (all of `0..q` when
    /// within [`STACK_CHECK_CAP`], else none).
    pub starts_checked: u64,
    pub first_mismatch: Option<u64>,
}

impl StackingReport {
    pub fn union_equal(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

fn cell_arc(start: &Z, len: &Z, q: &Z) -> IntervalSet {
    IntervalSet::arc(
        &Q::new(start.mod_floor(q), q.clone()),
        &Q::new(len.clone(), q.clone()),
    )
}

/// Decomposes the `Γ̃` set of child `i` of `next` for slice width `v` into
/// `b_(n+1)(i)` stacked intervals and, when small enough, checks the
/// decomposition against `{(j0 + s) a}` for every start `j0`.
pub fn stacking(next: &StageParams, i: usize, v: &Z) -> Result<StackingReport, PartitionError> {
    if i >= next.t {
        return Err(PartitionError::Precondition(format!(
            "child {i} outside t = {}",
            next.t
        )));
    }
    let q = next.q.clone();
    let a = next.a[i].mod_floor(&q);
    let b = next.b[i].clone();
    if v.is_negative() || v > &q {
        return Err(PartitionError::Precondition(format!(
            "slice width {v} outside 0..={q}"
        )));
    }
    if v.is_zero() {
        return Ok(StackingReport {
            child: i,
            v: v.clone(),
            a,
            b,
            q,
            f: Z::zero(),
            m: Z::zero(),
            slices: Vec::new(),
            realized: IntervalSet::empty(),
            degenerate: true,
            starts_checked: 0,
            first_mismatch: None,
        });
    }
    let (f, m) = (v - Z::one()).div_rem(&b);
    let nb = b
        .to_u64()
        .filter(|&x| x <= 1_000_000)
        .ok_or_else(|| PartitionError::Budget(format!("b = {b} slices")))?;
    let mut slices = Vec::with_capacity(nb as usize);
    let mut realized = IntervalSet::empty();
    for l in 0..nb {
        let lz = Z::from(l);
        let la = &lz * &a;
        let k = la.div_floor(v);
        let r = &la - v * &k;
        let count = if lz <= m { &f + Z::one() } else { f.clone() };
        let span = cell_arc(&la, &count, &q);
        realized = realized.union(&span);
        slices.push(StackSlice {
            l,
            k,
            r,
            count,
            span,
        });
    }
    let mut report = StackingReport {
        child: i,
        v: v.clone(),
        a,
        b,
        q,
        f,
        m,
        slices,
        realized,
        degenerate: false,
        starts_checked: 0,
        first_mismatch: None,
    };
    let work = (&report.q * v).to_u64();
    if work.is_some_and(|w| w <= STACK_CHECK_CAP) {
        let qn = report.q.to_u64().expect("small");
        let vn = v.to_u64().expect("small");
        for j0 in 0..qn {
            let brute = brute_gamma_tilde(j0, vn, &report.a, &report.q);
            let shift = Q::new(Z::from(j0) * &report.a, report.q.clone());
            report.starts_checked += 1;
            if brute != report.realized.rotate(&shift) {
                report.first_mismatch = Some(j0);
                break;
            }
        }
    }
    Ok(report)
}

/// `⋃_(s < v) [((j0 + s) a mod q)/q, … + 1/q)` cell by cell.
pub fn brute_gamma_tilde(j0: u64, v: u64, a: &Z, q: &Z) -> IntervalSet {
    let one = Z::one();
    IntervalSet::from_arcs((0..v).map(|s| {
        let lab = ((Z::from(j0) + Z::from(s)) * a).mod_floor(q);
        (Q::new(lab, q.clone()), Q::new(one.clone(), q.clone()))
    }))
}
