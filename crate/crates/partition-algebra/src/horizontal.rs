//! Horizontal approximation of `η_n^(n+1)`: the partitions `P_0`, `P_i` and
//! the distance to `η_n'^(n+1)`.
//!
//! All positions are integers in units of `1/q` with `q = q_(n+1)`. An arc
//! class `(γ, j)` is the label range `[Mγ + jv, Mγ + jv + L_j)` with `L_j = v`
//! for `j < y` and `L_y = ρ`. For child `i` the `Γ̃` set of the arc starting at
//! `s` is `s a_i + R_i` with `R_i` the stacked slices of [`crate::stacking`].

use std::collections::{BTreeMap, BTreeSet};

use gk_base::{par, Q, Z};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::refine::{slice_divisor, FamilyClasses};
use crate::{CellPartition, PartitionError, Refinement, Region};

use kronecker_set::IntervalSet;

/// Largest number of positions or enumerated boundary points in the exact
/// small-instance computations.
pub const EXACT_CAP: u64 = 50_000_000;

/// The per-stage budgets `ε'_0` (for `P̄_0`) and `ε'_1` (for `w_(n+1)`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub eps0: Q,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub eps1: Q,
}

impl Budgets {
    /// `2^(−n)/t_n` for both.
    pub fn default_for(n: u32, t: usize) -> Self {
        let e = Q::new(Z::one(), (Z::one() << n as usize) * Z::from(t));
        Budgets {
            eps0: e.clone(),
            eps1: e,
        }
    }
}

/// Integer data of the horizontal approximation at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizontalParams {
    pub n: u32,
    pub t_n: usize,
    pub t_next: usize,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub q_n: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub q: Z,
    /// `q/q_n`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub m: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub v: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub y: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub rho: Z,
    /// Child weights `b_(n+1)(i)`.
    #[serde(with = "gk_base::rational::serde_str::int_vec")]
    pub b: Vec<Z>,
    /// Child multipliers `a_(n+1)(i) mod q`, when known.
    #[serde(with = "gk_base::rational::serde_str::int_vec")]
    pub a: Vec<Z>,
    /// `x_i` coordinate of each child.
    pub coord: Vec<usize>,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub w: Z,
    /// `q = w u + λ`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub u: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub lambda: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub w_prime: Z,
    /// `q/q_n = w' u' + λ'`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub u_prime: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub lambda_prime: Z,
}

/// `⌊q ε'_1 / (2^(3n) q_n^(t_n) r (y q_n)^r b)⌋` with `r = t_(n+1)/t_n` and `b`
/// the largest child weight.
#[allow(clippy::too_many_arguments)]
pub fn w_floor(n: u32, q_n: &Z, t_n: usize, r: usize, y: &Z, b_max: &Z, q: &Z, eps1: &Q) -> Z {
    let den = (Z::one() << (3 * n as usize))
        * q_n.pow(t_n as u32)
        * Z::from(r)
        * (y * q_n).pow(r as u32)
        * b_max;
    (Q::from_integer(q.clone()) * eps1 / Q::from_integer(den)).floor().to_integer()
}

/// `⌊q ε'_0 / (3 u t_(n+1) q_n b y)⌋`.
pub fn w_prime_floor(q: &Z, u: &Z, t_next: usize, q_n: &Z, b_max: &Z, y: &Z, eps0: &Q) -> Z {
    let den = Z::from(3) * u * Z::from(t_next) * q_n * b_max * y;
    if den.is_zero() {
        return Z::zero();
    }
    (Q::from_integer(q.clone()) * eps0 / Q::from_integer(den)).floor().to_integer()
}

fn infeasible(floor: &str, detail: String) -> PartitionError {
    PartitionError::Infeasible {
        floor: floor.into(),
        detail,
        minimal_q: None,
    }
}

impl HorizontalParams {
    /// Widths from the defining floors. `q` is `q_(n+1)`; `a` may be empty.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        n: u32,
        q_n: &Z,
        t_n: usize,
        b: &[Z],
        a: &[Z],
        q: &Z,
        coord: Vec<usize>,
        budgets: &Budgets,
    ) -> Result<Self, PartitionError> {
        let t_next = b.len();
        let r = t_next / t_n;
        let k0 = r.trailing_zeros();
        let div = slice_divisor(n, t_n, q_n, k0);
        let v = q / &div;
        if v.is_zero() {
            return Err(infeasible("v_(n+1) ≥ 1", format!("q_(n+1) = {q} < {div}")));
        }
        let m = q / q_n;
        let y = &m / &v;
        let b_max = b.iter().max().cloned().unwrap_or_else(Z::one);
        let w = w_floor(n, q_n, t_n, r, &y, &b_max, q, &budgets.eps1);
        if w.is_zero() {
            return Err(infeasible("w_(n+1) ≥ 1", format!("q_(n+1) = {q}")));
        }
        let u = q / &w;
        let wp = w_prime_floor(q, &u, t_next, q_n, &b_max, &y, &budgets.eps0);
        if wp.is_zero() {
            return Err(infeasible("w'_(n+1) ≥ 1", format!("q_(n+1) = {q}")));
        }
        Self::with_widths(n, q_n, t_n, b, a, q, coord, v, w, wp)
    }

    /// Explicit widths, for small instances.
    #[allow(clippy::too_many_arguments)]
    pub fn with_widths(
        n: u32,
        q_n: &Z,
        t_n: usize,
        b: &[Z],
        a: &[Z],
        q: &Z,
        coord: Vec<usize>,
        v: Z,
        w: Z,
        w_prime: Z,
    ) -> Result<Self, PartitionError> {
        let t_next = b.len();
        if t_n == 0 || !t_next.is_multiple_of(t_n) || coord.len() != t_next {
            return Err(PartitionError::Shape("child families do not match t_n".into()));
        }
        if !(q % q_n).is_zero() {
            return Err(PartitionError::Precondition(format!("q_n = {q_n} ∤ q = {q}")));
        }
        let m = q / q_n;
        if !v.is_positive() || v > m || !w.is_positive() || w > *q || !w_prime.is_positive() {
            return Err(PartitionError::Precondition(format!(
                "widths v = {v}, w = {w}, w' = {w_prime} out of range"
            )));
        }
        for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
            if !((ai * bi) % q).is_one() {
                return Err(PartitionError::Precondition(format!(
                    "a({i}) b({i}) ≢ 1 mod q"
                )));
            }
        }
        let (y, rho) = m.div_rem(&v);
        let (u, lambda) = q.div_rem(&w);
        let (u_prime, lambda_prime) = m.div_rem(&w_prime);
        Ok(HorizontalParams {
            n,
            t_n,
            t_next,
            q_n: q_n.clone(),
            q: q.clone(),
            m,
            v,
            y,
            rho,
            b: b.to_vec(),
            a: a.iter().map(|x| x.mod_floor(q)).collect(),
            coord,
            w,
            u,
            lambda,
            w_prime,
            u_prime,
            lambda_prime,
        })
    }

    /// From a refinement, with the widths derived from `budgets`.
    pub fn from_refinement(rf: &Refinement, budgets: &Budgets) -> Result<Self, PartitionError> {
        let coord = rf.h_next();
        let out = Self::derive(
            rf.prev.n,
            &rf.prev.q,
            rf.prev.t,
            &rf.next.b,
            &rf.next.a,
            &rf.next.q,
            coord,
            budgets,
        );
        match out {
            Err(PartitionError::Infeasible { floor, detail, .. }) => {
                let minimal = minimal_feasible_d(&rf.prev, &rf.next.b, budgets)
                    .ok()
                    .map(|(_, q)| q);
                Err(PartitionError::Infeasible {
                    floor,
                    detail,
                    minimal_q: minimal,
                })
            }
            other => other,
        }
    }

    pub fn b_max(&self) -> Z {
        self.b.iter().max().cloned().unwrap_or_else(Z::one)
    }

    /// Arc classes per sector (`y + 1`, or `y` when `ρ = 0`).
    pub fn classes(&self) -> Z {
        if self.rho.is_zero() {
            self.y.clone()
        } else {
            &self.y + Z::one()
        }
    }

    fn small(&self) -> Result<u64, PartitionError> {
        self.q
            .to_u64()
            .filter(|&q| q <= EXACT_CAP)
            .ok_or_else(|| PartitionError::Budget(format!("q = {} for exact enumeration", self.q)))
    }
}

/// Lower bound on `μ(P̄_0)` without enumeration. Each start point of an
/// element of some `P(i, j)` lies inside at most one block of `P'(w')`, so at
/// most that many blocks are lost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P0Certificate {
    /// Blocks of width `w'` outside the remainders, `q_n u'`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub blocks: Z,
    /// Upper bound on the number of element start points over all `(i, j)`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub boundary_points: Z,
    /// Measure of the remainders `q_n λ'/q`.
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub remainder_measure: Q,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub lower_bound: Q,
    /// `1 − ε'_0`.
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub target: Q,
    pub holds: bool,
}

pub fn p0_certificate(hp: &HorizontalParams, eps0: &Q) -> P0Certificate {
    let blocks = &hp.q_n * &hp.u_prime;
    let per_sector = |b: &Z| &hp.y * (&hp.v).min(b) + (&hp.rho).min(b);
    let per_j: Z = hp.b.iter().map(|b| &hp.q_n * per_sector(b)).sum();
    let boundary_points = (&hp.u + Z::one()) * per_j;
    let kept = (&blocks - &boundary_points).max(Z::zero());
    let lower_bound = Q::new(kept * &hp.w_prime, hp.q.clone());
    let target = Q::one() - eps0;
    P0Certificate {
        holds: lower_bound >= target,
        remainder_measure: Q::new(&hp.q_n * &hp.lambda_prime, hp.q.clone()),
        blocks,
        boundary_points,
        lower_bound,
        target,
    }
}

/// The start points and sizes of the elements of `P(i, j)`, namely
/// `j w + (Mγ + kv) a_i + R_i`.
fn elements(hp: &HorizontalParams, i: usize, j: u64) -> Vec<(u64, u64)> {
    let q = hp.q.to_u64().expect("small");
    let m = hp.m.to_u64().expect("small");
    let v = hp.v.to_u64().expect("small");
    let rho = hp.rho.to_u64().expect("small");
    let y = hp.y.to_u64().expect("small");
    let w = hp.w.to_u64().expect("small");
    let q_n = hp.q_n.to_u64().expect("small");
    let a = hp.a[i].to_u128().expect("below q");
    let b = hp.b[i].to_u64().expect("small");
    let qq = q as u128;
    let mut out = Vec::new();
    for g in 0..q_n {
        for k in 0..=y {
            let len = if k < y { v } else { rho };
            if len == 0 {
                continue;
            }
            let start = (g * m + k * v) as u128;
            let base = (j as u128 * w as u128 + start * a) % qq;
            let f = (len - 1) / b;
            let mm = len - 1 - b * f;
            for l in 0..b {
                let cnt = if l <= mm { f + 1 } else { f };
                if cnt == 0 {
                    continue;
                }
                let pos = (base + l as u128 * a) % qq;
                out.push((pos as u64, cnt));
            }
        }
    }
    out
}

/// `P_0` built by enumeration, with the exact checks on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P0Partition {
    /// Starts of the blocks of `P̄_0`.
    pub good_blocks: Vec<u64>,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub measure: Q,
    /// Every `P(i, j)` is a partition of the circle.
    pub families_partition: bool,
    /// Every block of `P̄_0` lies in one element of every `P(i, j)`.
    pub containment: bool,
    /// `P̄_0 + 1/q_n = P̄_0`.
    pub rotation_invariant: bool,
    pub certificate: P0Certificate,
}

impl P0Partition {
    /// `P_0`: the blocks of `P̄_0` (label `[0, start]`) and the cells of width
    /// `1/q` outside them (label `[1, k]`).
    pub fn partition(&self, hp: &HorizontalParams) -> Result<CellPartition, PartitionError> {
        let q = hp.small()?;
        let wp = hp.w_prime.to_u64().expect("small");
        let mut covered = vec![false; q as usize];
        let mut cells = BTreeMap::new();
        for &c in &self.good_blocks {
            for x in c..c + wp {
                covered[(x % q) as usize] = true;
            }
            cells.insert(vec![0, c], Region::cuboid(vec![arc(c, wp, q)]));
        }
        for (k, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            cells.insert(vec![1, k as u64], Region::cuboid(vec![arc(k as u64, 1, q)]));
        }
        CellPartition::new(vec![0], cells)
    }
}

fn arc(start: u64, len: u64, q: u64) -> IntervalSet {
    IntervalSet::arc(
        &Q::new(Z::from(start), Z::from(q)),
        &Q::new(Z::from(len), Z::from(q)),
    )
}

/// Builds `P̄_0` exactly: the blocks `γ/q_n + j'w'/q + [0, w'/q)` with
/// `j' < u'` whose interior contains no start point of any `P(i, j)`.
pub fn build_p0(hp: &HorizontalParams, eps0: &Q) -> Result<P0Partition, PartitionError> {
    let q = hp.small()?;
    if hp.a.len() != hp.b.len() {
        return Err(PartitionError::Precondition("child multipliers are required".into()));
    }
    let u = hp.u.to_u64().expect("below q");
    let work = (u + 1) as u128 * hp.t_next as u128 * q as u128;
    if work > EXACT_CAP as u128 * 4 {
        return Err(PartitionError::Budget(format!("{work} positions to scan")));
    }
    let m = hp.m.to_u64().expect("small");
    let wp = hp.w_prime.to_u64().expect("small");
    let up = hp.u_prime.to_u64().expect("small");
    let q_n = hp.q_n.to_u64().expect("small");
    let combos: Vec<(usize, u64)> = (0..hp.t_next)
        .flat_map(|i| (0..=u).map(move |j| (i, j)))
        .collect();
    // For every (i, j): the owner (element start) of each position, or a
    // failure flag when the elements do not tile the circle.
    let owners: Vec<Option<Vec<u64>>> = par::map_slice(&combos, |&(i, j)| {
        let mut owner = vec![u64::MAX; q as usize];
        for (pos, cnt) in elements(hp, i, j) {
            for x in 0..cnt {
                let o = &mut owner[((pos + x) % q) as usize];
                if *o != u64::MAX {
                    return None;
                }
                *o = pos;
            }
        }
        owner.iter().all(|&o| o != u64::MAX).then_some(owner)
    });
    let families_partition = owners.iter().all(Option::is_some);
    let mut boundary = vec![false; q as usize];
    for &(i, j) in &combos {
        for (pos, _) in elements(hp, i, j) {
            boundary[pos as usize] = true;
        }
    }
    let mut good_blocks = Vec::new();
    for g in 0..q_n {
        for jb in 0..up {
            let c = g * m + jb * wp;
            if (c + 1..c + wp).all(|x| !boundary[(x % q) as usize]) {
                good_blocks.push(c);
            }
        }
    }
    let containment = families_partition
        && owners.iter().flatten().all(|owner| {
            good_blocks.iter().all(|&c| {
                let o = owner[c as usize];
                (c..c + wp).all(|x| owner[(x % q) as usize] == o)
            })
        });
    let set: BTreeSet<u64> = good_blocks.iter().copied().collect();
    let rotation_invariant = good_blocks.iter().all(|&c| set.contains(&((c + m) % q)));
    Ok(P0Partition {
        measure: Q::new(Z::from(good_blocks.len() as u64 * wp), Z::from(q)),
        good_blocks,
        families_partition,
        containment,
        rotation_invariant,
        certificate: p0_certificate(hp, eps0),
    })
}

/// `Σ_(o < W) min(L, o b)`.
pub fn trapezoid(width: &Z, len: &Z, b: &Z) -> Z {
    if width.is_zero() {
        return Z::zero();
    }
    let c = (len / b).min(width - Z::one());
    b * &c * (&c + Z::one()) / Z::from(2) + (width - Z::one() - &c) * len
}

/// Bound on `d(η_n^(n+1), η_n'^(n+1))`.
///
/// In `η'` the circle part of a `Γ̃` set on coordinate `x_H` is frozen at the
/// left edge of each block `P(j')`. A point at offset `o` inside its block
/// keeps its arc class unless the class moves by `o b`, which happens on at
/// most `Σ_arcs min(L, o b)` of the `q` circle cells. Summing over offsets
/// bounds `μ{κ̃_H ≠ κ'_H}` per child; twice the sum over children bounds the
/// partition distance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaPrimeBound {
    /// `μ{κ̃_H ≠ κ'_H}` bound per child (0 on the circle coordinate).
    #[serde(with = "gk_base::rational::serde_str::rat_vec")]
    pub per_child: Vec<Q>,
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub distance_bound: Q,
    /// `1/2^n`.
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub target: Q,
    pub holds: bool,
}

pub fn eta_prime_bound(hp: &HorizontalParams) -> EtaPrimeBound {
    let q2 = &hp.q * &hp.q;
    let per_child: Vec<Q> = (0..hp.t_next)
        .map(|i| {
            if hp.coord[i] == 0 {
                return Q::zero();
            }
            let b = &hp.b[i];
            let t = |width: &Z| {
                &hp.y * trapezoid(width, &hp.v, b) + trapezoid(width, &hp.rho, b)
            };
            let count = &hp.q_n * (&hp.u * t(&hp.w) + t(&hp.lambda));
            Q::new(count, q2.clone())
        })
        .collect();
    let distance_bound = per_child.iter().fold(Q::zero(), |acc, x| acc + x) * Q::from_integer(Z::from(2));
    let target = Q::new(Z::one(), Z::one() << hp.n as usize);
    EtaPrimeBound {
        holds: distance_bound <= target,
        per_child,
        distance_bound,
        target,
    }
}

fn arc_class(x: u64, m: u64, v: u64, y: u64) -> (u64, u64) {
    let g = x / m;
    let j = ((x % m) / v).min(y);
    (g, j)
}

/// Exact values on a small instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaPrimeExact {
    /// `μ{κ̃_H ≠ κ'_H}` per child.
    #[serde(with = "gk_base::rational::serde_str::rat_vec")]
    pub per_child: Vec<Q>,
    /// `Σ_l μ(Δ(i', l) △ Δ'(i', l))` per family, when classes were given.
    #[serde(with = "gk_base::rational::serde_str::rat_vec")]
    pub per_family: Vec<Q>,
    /// Sum of `per_family`; it bounds the distance of the joint partitions.
    #[serde(with = "gk_base::rational::serde_str::rat")]
    pub distance: Q,
    /// The `η'` labels of every given family move by one under rotation of
    /// the circle by `1/q_n`.
    pub stable_rotation: bool,
}

/// Enumerates the circle and cube cells. `families`, when given, are class
/// tables `E(i', ·)` (any subset of the families, built with the same `v`)
/// and the exact family distances are computed from them.
pub fn eta_prime_exact(
    hp: &HorizontalParams,
    families: Option<&[FamilyClasses]>,
) -> Result<EtaPrimeExact, PartitionError> {
    let q = hp.small()?;
    if (q as u128) * (q as u128) > EXACT_CAP as u128 {
        return Err(PartitionError::Budget(format!("q² = {} cells", q * q)));
    }
    let (m, v, y, w) = (
        hp.m.to_u64().expect("small"),
        hp.v.to_u64().expect("small"),
        hp.y.to_u64().expect("small"),
        hp.w.to_u64().expect("small"),
    );
    let bs: Vec<u64> = hp.b.iter().map(|b| (b % &hp.q).to_u64().expect("small")).collect();
    let q2 = Z::from(q) * Z::from(q);
    let per_child = (0..hp.t_next)
        .map(|i| {
            if hp.coord[i] == 0 {
                return Q::zero();
            }
            let b = bs[i] as u128;
            let count: u64 = par::map_range(q as usize, |x| {
                let x = x as u64;
                let frozen = w * (x / w);
                (0..q)
                    .filter(|&z| {
                        let lt = ((z + q - x) % q) as u128 * b % q as u128;
                        let lp = ((z + q - frozen) % q) as u128 * b % q as u128;
                        arc_class(lt as u64, m, v, y) != arc_class(lp as u64, m, v, y)
                    })
                    .count() as u64
            })
            .into_iter()
            .sum();
            Q::new(Z::from(count), q2.clone())
        })
        .collect();
    let mut per_family = Vec::new();
    let mut stable_rotation = true;
    if let Some(fams) = families {
        let r = hp.t_next / hp.t_n;
        for fc in fams {
            if fc.children != r
                || fc.q_n != hp.q_n.to_u64().unwrap_or(0)
                || Z::from(fc.classes) != hp.classes()
            {
                return Err(PartitionError::Shape(format!(
                    "classes of family {} do not match the widths",
                    fc.family
                )));
            }
            let kids: Vec<usize> = (fc.family * r..(fc.family + 1) * r).collect();
            let axes: Vec<usize> = kids.iter().copied().filter(|&i| hp.coord[i] != 0).collect();
            let points = (q as u128).pow(axes.len() as u32 + 1);
            if points > EXACT_CAP as u128 {
                return Err(PartitionError::Budget(format!(
                    "{points} points in family {}",
                    fc.family
                )));
            }
            let classes_at = |z: u64, xs: &[u64], frozen: bool| -> u64 {
                let digits: Vec<(u64, u64)> = kids
                    .iter()
                    .map(|&i| {
                        let l = match axes.iter().position(|&k| k == i) {
                            None => z,
                            Some(k) if frozen => (z + q - w * (xs[k] / w)) % q,
                            Some(k) => (z + q - xs[k]) % q,
                        };
                        arc_class((l as u128 * bs[i] as u128 % q as u128) as u64, m, v, y)
                    })
                    .collect();
                fc.labels[fc.index(&digits) as usize] as u64
            };
            let q_n = fc.q_n;
            let counts: Vec<(u64, bool)> = par::map_range(q as usize, |z| {
                let z = z as u64;
                let mut n = 0u64;
                let mut stable = true;
                let mut xs = vec![0u64; axes.len()];
                loop {
                    let lp = classes_at(z, &xs, true);
                    if classes_at(z, &xs, false) != lp {
                        n += 1;
                    }
                    // Rotating the circle by 1/q_n moves every label by one.
                    if classes_at((z + m) % q, &xs, true) != (lp + 1) % q_n {
                        stable = false;
                    }
                    let mut k = 0;
                    while k < xs.len() {
                        xs[k] += 1;
                        if xs[k] < q {
                            break;
                        }
                        xs[k] = 0;
                        k += 1;
                    }
                    if k == xs.len() {
                        break;
                    }
                }
                (n, stable)
            });
            let differs: u64 = counts.iter().map(|c| c.0).sum();
            stable_rotation &= counts.iter().all(|c| c.1);
            per_family.push(Q::new(
                Z::from(2 * differs),
                Z::from(q).pow(axes.len() as u32 + 1),
            ));
        }
    }
    let distance = per_family.iter().fold(Q::zero(), |acc, x| acc + x);
    Ok(EtaPrimeExact {
        per_child,
        per_family,
        distance,
        stable_rotation,
    })
}

/// Whether `q = q_n (1 + d Π b)` meets every floor and both certificates.
pub fn feasible_at(prev: &StageParams, b_next: &[Z], d: &Z, budgets: &Budgets) -> bool {
    let prod: Z = b_next.iter().product();
    let q = &prev.q * (Z::one() + d * prod);
    let coord = match crate::index_permutation(prev.t, b_next.len()) {
        Ok(h) => h,
        Err(_) => return false,
    };
    match HorizontalParams::derive(prev.n, &prev.q, prev.t, b_next, &[], &q, coord, budgets) {
        Ok(hp) => p0_certificate(&hp, &budgets.eps0).holds && eta_prime_bound(&hp).holds,
        Err(_) => false,
    }
}

/// Smallest `d` (by doubling, then bisection) at which [`feasible_at`]
/// holds, with its `q_(n+1)`.
pub fn minimal_feasible_d(
    prev: &StageParams,
    b_next: &[Z],
    budgets: &Budgets,
) -> Result<(Z, Z), PartitionError> {
    let mut hi = Z::one();
    let mut steps = 0;
    while !feasible_at(prev, b_next, &hi, budgets) {
        hi <<= 1;
        steps += 1;
        if steps > 256 {
            return Err(PartitionError::Budget("no feasible d below 2^256".into()));
        }
    }
    let mut lo = &hi >> 1; // infeasible unless hi = 1
    if hi.is_one() {
        lo = Z::zero();
    }
    while &hi - &lo > Z::one() {
        let mid: Z = (&lo + &hi) >> 1;
        if feasible_at(prev, b_next, &mid, budgets) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let prod: Z = b_next.iter().product();
    let q = &prev.q * (Z::one() + &hi * prod);
    Ok((hi, q))
}
