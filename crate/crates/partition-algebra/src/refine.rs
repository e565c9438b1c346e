//! One refinement step `n → n+1`: the arc classes of the child increments,
//! the index sets `E(i', l)` and the commuting square built on them.

use std::collections::{BTreeMap, HashSet};

use gk_base::{par, Q, Z};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::algebra::{build_k, index_permutation, uniform_measure};
use crate::partition::all_labels;
use crate::{AlgebraMap, DiagramResult, Label, LabelAction, MapCheck, PartitionError};

/// Largest number of child-class tuples classified per family.
pub const TUPLE_CAP: u64 = 20_000_000;

/// Band (in turns) around a sector boundary inside which an argument is
/// treated as lying on the boundary.
pub const TIE_BAND: f64 = 1e-9;

/// `2^k0 · 2^(2n+1) · t_n · q_n^(t_n + k0)`, the divisor in the slice width
/// `v_(n+1) = ⌊q_(n+1) / divisor⌋`.
pub fn slice_divisor(n: u32, t: usize, q: &Z, k0: u32) -> Z {
    (Z::one() << (k0 as usize + 2 * n as usize + 1)) * Z::from(t) * q.pow(t as u32 + k0)
}

/// A consecutive pair of stages with the slice data of the step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    pub prev: StageParams,
    pub next: StageParams,
    /// `t_(n−1)`, which fixes `h_n`.
    pub t_prev: usize,
    /// `t_(n+1) = 2^k0 t_n`.
    pub k0: u32,
    /// `q_(n+1) / q_n`.
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub m: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub v: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub y: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub rho: Z,
}

impl Refinement {
    /// Uses `v_(n+1) = ⌊q_(n+1) / slice_divisor⌋`.
    pub fn new(prev: &StageParams, next: &StageParams, t_prev: usize) -> Result<Self, PartitionError> {
        let k0 = ratio_exponent(prev, next)?;
        let div = slice_divisor(prev.n, prev.t, &prev.q, k0);
        let v = &next.q / &div;
        if v.is_zero() {
            return Err(PartitionError::Infeasible {
                floor: "v_(n+1) ≥ 1".into(),
                detail: format!("q_(n+1) = {} is below {div}", next.q),
                minimal_q: Some(div),
            });
        }
        Self::with_v(prev, next, t_prev, v)
    }

    /// Uses an explicit slice width `0 < v ≤ q_(n+1)/q_n`.
    pub fn with_v(
        prev: &StageParams,
        next: &StageParams,
        t_prev: usize,
        v: Z,
    ) -> Result<Self, PartitionError> {
        let k0 = ratio_exponent(prev, next)?;
        if !(&next.q % &prev.q).is_zero() {
            return Err(PartitionError::Precondition(format!(
                "q_n = {} does not divide q_(n+1) = {}",
                prev.q, next.q
            )));
        }
        let r = next.t / prev.t;
        for i in 0..next.t {
            if !((&next.a[i] - &prev.a[i / r]) % &prev.q).is_zero() {
                return Err(PartitionError::Precondition(format!(
                    "a_(n+1)({i}) ≢ a_n({}) mod q_n",
                    i / r
                )));
            }
        }
        let m = &next.q / &prev.q;
        if v <= Z::zero() || v > m {
            return Err(PartitionError::Precondition(format!(
                "slice width v = {v} outside 1..={m}"
            )));
        }
        let (y, rho) = m.div_rem(&v);
        Ok(Refinement {
            prev: prev.clone(),
            next: next.clone(),
            t_prev,
            k0,
            m,
            v,
            y,
            rho,
        })
    }

    /// Children per parent, `t_(n+1)/t_n`.
    pub fn ratio(&self) -> usize {
        self.next.t / self.prev.t
    }

    /// Number of arc classes per sector: `y + 1`, or `y` when `ρ = 0`.
    pub fn classes(&self) -> u64 {
        let y = self.y.to_u64().unwrap_or(u64::MAX);
        if self.rho.is_zero() {
            y
        } else {
            y.saturating_add(1)
        }
    }

    /// Length of arc class `j` in units of `1/q_(n+1)`.
    pub fn arc_len(&self, j: u64) -> &Z {
        if Z::from(j) < self.y {
            &self.v
        } else {
            &self.rho
        }
    }

    /// First grid point of the arc `(γ, j)`, namely `M γ + j v`.
    pub fn arc_start(&self, gamma: u64, j: u64) -> Z {
        &self.m * Z::from(gamma) + &self.v * Z::from(j)
    }

    pub fn h_n(&self) -> Vec<usize> {
        index_permutation(self.t_prev, self.prev.t).expect("validated")
    }

    pub fn h_next(&self) -> Vec<usize> {
        index_permutation(self.prev.t, self.next.t).expect("validated")
    }
}

fn ratio_exponent(prev: &StageParams, next: &StageParams) -> Result<u32, PartitionError> {
    if next.n != prev.n + 1 || !next.t.is_multiple_of(prev.t) || !(next.t / prev.t).is_power_of_two() {
        return Err(PartitionError::Precondition(format!(
            "stages {} (t = {}) and {} (t = {}) are not consecutive",
            prev.n, prev.t, next.n, next.t
        )));
    }
    let k0 = (next.t / prev.t).trailing_zeros();
    if k0 == 0 {
        return Err(PartitionError::Precondition("t_(n+1) = t_n".into()));
    }
    Ok(k0)
}

/// The sets `E(i', l)` for one family.
///
/// A tuple gives each child `s` an arc class `(γ_s, j_s)`. Conditioning the
/// family increment on these classes gives, up to a common positive factor,
/// `Σ_s sinc(π L_s/q_(n+1)) e^(2iπ θ_s)` with `θ_s` the arc midpoint, so the
/// tuple belongs to `E(i', l)` when that argument lies in sector `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyClasses {
    pub family: usize,
    pub q_n: u64,
    pub classes: u64,
    pub children: usize,
    /// Sector of every tuple; the digit of child `s` is `γ_s · classes + j_s`,
    /// child 0 most significant.
    pub labels: Vec<u32>,
    /// Tuples whose argument fell within [`TIE_BAND`] of a boundary.
    pub near_ties: u64,
    /// Tuples whose conditional mean vanished.
    pub degenerate: u64,
}

impl FamilyClasses {
    pub fn tuples(&self) -> u64 {
        self.labels.len() as u64
    }

    pub fn digits(&self, mut idx: u64) -> Vec<(u64, u64)> {
        let base = self.q_n * self.classes;
        let mut out = vec![(0, 0); self.children];
        for s in (0..self.children).rev() {
            let d = idx % base;
            idx /= base;
            out[s] = (d / self.classes, d % self.classes);
        }
        out
    }

    pub fn index(&self, digits: &[(u64, u64)]) -> u64 {
        let base = self.q_n * self.classes;
        digits
            .iter()
            .fold(0, |acc, &(g, j)| acc * base + g * self.classes + j)
    }
}

fn turns_of(re: f64, im: f64) -> f64 {
    let t = im.atan2(re) / std::f64::consts::TAU;
    if t < 0.0 {
        t + 1.0
    } else {
        t
    }
}

/// Classifies every tuple of family `ip`. Tuples on a sector boundary or
/// with a vanishing mean take the label of their rotation with `γ_0 = 0`,
/// shifted back; this keeps the sets rotation-equivariant.
pub fn classify_family(rf: &Refinement, ip: usize) -> Result<FamilyClasses, PartitionError> {
    let q_n = rf.prev.q.to_u64().filter(|&q| q < u32::MAX as u64).ok_or_else(|| {
        PartitionError::Budget(format!("q_n = {} is too large to classify", rf.prev.q))
    })?;
    let classes = rf.classes();
    let r = rf.ratio();
    let base = q_n
        .checked_mul(classes)
        .filter(|&b| b > 0)
        .ok_or_else(|| PartitionError::Budget("arc classes overflow".into()))?;
    let total = base
        .checked_pow(r as u32)
        .filter(|&n| n <= TUPLE_CAP)
        .ok_or_else(|| {
            PartitionError::Budget(format!(
                "({q_n}·{classes})^{r} tuples exceed the cap {TUPLE_CAP}"
            ))
        })?;
    let qn = rf.next.q.to_f64().expect("finite");
    // Midpoint (turns) and weight of each digit.
    let mut mid = Vec::with_capacity(base as usize);
    let mut wt = Vec::with_capacity(base as usize);
    for g in 0..q_n {
        for j in 0..classes {
            let len = rf.arc_len(j).to_f64().expect("finite");
            let start = rf.arc_start(g, j).to_f64().expect("finite");
            mid.push((start + len / 2.0) / qn);
            let x = std::f64::consts::PI * len / qn;
            wt.push(if x == 0.0 { 1.0 } else { x.sin() / x });
        }
    }
    let raw = |idx: u64| -> (Option<u32>, bool) {
        let mut re = 0.0;
        let mut im = 0.0;
        let mut rest = idx;
        for _ in 0..r {
            let d = (rest % base) as usize;
            rest /= base;
            let a = std::f64::consts::TAU * mid[d];
            re += wt[d] * a.cos();
            im += wt[d] * a.sin();
        }
        if re.hypot(im) < 1e-12 {
            return (None, false);
        }
        let s = turns_of(re, im) * q_n as f64;
        let nearest = s.round();
        if (s - nearest).abs() < TIE_BAND * q_n as f64 {
            (None, true)
        } else {
            (Some((s.floor() as u64 % q_n) as u32), false)
        }
    };
    let shift_digit = base.pow(r as u32 - 1);
    let first = par::map_range(total as usize, |idx| raw(idx as u64));
    let mut near_ties = 0;
    let mut degenerate = 0;
    let mut labels = Vec::with_capacity(total as usize);
    for (idx, &(lab, tie)) in first.iter().enumerate() {
        let l = match lab {
            Some(l) => l,
            None => {
                if tie {
                    near_ties += 1;
                } else {
                    degenerate += 1;
                }
                // Rotate so that γ_0 = 0, classify, rotate back.
                let idx = idx as u64;
                let g0 = (idx / shift_digit) / classes;
                let rep = rotate_index(idx, base, classes, r, q_n - g0 % q_n);
                let rl = match first[rep as usize].0 {
                    Some(l) => l as u64,
                    None => {
                        let (re, im) = representative_sum(rep, base, r, &mid, &wt);
                        let s = turns_of(re, im) * q_n as f64;
                        (s.round() as u64) % q_n
                    }
                };
                ((rl + g0) % q_n) as u32
            }
        };
        labels.push(l);
    }
    Ok(FamilyClasses {
        family: ip,
        q_n,
        classes,
        children: r,
        labels,
        near_ties,
        degenerate,
    })
}

fn representative_sum(idx: u64, base: u64, r: usize, mid: &[f64], wt: &[f64]) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut rest = idx;
    for _ in 0..r {
        let d = (rest % base) as usize;
        rest /= base;
        let a = std::f64::consts::TAU * mid[d];
        re += wt[d] * a.cos();
        im += wt[d] * a.sin();
    }
    (re, im)
}

/// Adds `c` to every `γ_s` of a tuple index.
fn rotate_index(idx: u64, base: u64, classes: u64, r: usize, c: u64) -> u64 {
    let q_n = base / classes;
    let mut out = 0;
    let mut pow = 1;
    let mut rest = idx;
    for _ in 0..r {
        let d = rest % base;
        rest /= base;
        let g = (d / classes + c) % q_n;
        out += (g * classes + d % classes) * pow;
        pow *= base;
    }
    out
}

/// `E(i', l) + c = E(i', l + c)` for the diagonal shift `γ_s ↦ γ_s + c`.
pub fn classes_equivariant(fc: &FamilyClasses, c: u64) -> bool {
    let base = fc.q_n * fc.classes;
    let c = c % fc.q_n;
    par::all_range(fc.labels.len(), |idx| {
        let rot = rotate_index(idx as u64, base, fc.classes, fc.children, c);
        fc.labels[rot as usize] as u64 == (fc.labels[idx] as u64 + c) % fc.q_n
    })
}

/// `Σ_(tuples in E(i', l)) Π_s L_s`, indexed by `l`. Dividing by
/// `q_(n+1)^r` gives the measure of `c_n^(n+1)(i', l)`.
pub fn class_weights(rf: &Refinement, fc: &FamilyClasses) -> Result<Vec<Z>, PartitionError> {
    let mut acc = vec![Z::zero(); fc.q_n as usize];
    // Group by label and by the multiset of lengths: count tuples per
    // (label, number of ρ-children) to keep big-integer work small.
    let y = fc.classes - u64::from(!rf.rho.is_zero());
    let mut counts = vec![vec![0u64; fc.children + 1]; fc.q_n as usize];
    for (idx, &l) in fc.labels.iter().enumerate() {
        let short = fc
            .digits(idx as u64)
            .iter()
            .filter(|&&(_, j)| j >= y)
            .count();
        counts[l as usize][short] += 1;
    }
    for (l, row) in counts.iter().enumerate() {
        for (short, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let long = fc.children - short;
            let w = rf.v.pow(long as u32) * rf.rho.pow(short as u32);
            acc[l] += w * Z::from(c);
        }
    }
    Ok(acc)
}

/// Size of `{(j0 + s) a mod q : 0 ≤ s < len}`, the number of `Δ_(n+1)` cells
/// in one `Γ̃` set.
fn gamma_tilde_size(a: &Z, q: &Z, len: &Z) -> Result<Z, PartitionError> {
    let n = len
        .to_u64()
        .filter(|&n| n <= 10_000_000)
        .ok_or_else(|| PartitionError::Budget(format!("slice of length {len}")))?;
    let set: HashSet<Z> = (0..n).map(|s| (Z::from(s) * a) % q).collect();
    Ok(Z::from(set.len()))
}

/// Everything checked about the commuting square of one refinement step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareReport {
    pub n: u32,
    pub q_n: u64,
    pub t_n: usize,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub q_next: Z,
    pub t_next: usize,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub v: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub y: Z,
    #[serde(with = "gk_base::rational::serde_str::int")]
    pub rho: Z,
    pub maps: Vec<MapCheck>,
    pub diagram: DiagramResult,
    /// `E(i', l) + p_n b_n(i') = E(i', l + p_n b_n(i'))` for every family.
    pub classes_equivariant: bool,
    /// `K_(n+1) U_n = S K_(n+1)` on every `ẽ` cell.
    pub tilde_equivariant: bool,
    /// Every `c_n^(n+1)(i', l)` has measure exactly `1/q_n`.
    pub family_measures_uniform: bool,
    pub tuples: u64,
    pub near_ties: u64,
    pub degenerate: u64,
}

impl SquareReport {
    pub fn passed(&self) -> bool {
        self.maps.iter().all(MapCheck::passed)
            && self.diagram.commutes
            && self.classes_equivariant
            && self.tilde_equivariant
            && self.family_measures_uniform
    }
}

/// Builds and checks
///
/// ```text
///   ζ_n ---K_n---> η_n
///    |              |
///   Q_n^(n+1)     C_n^(n+1)
///    v              v
///   ζ_n^(n+1) -K_n^(n+1)-> η_n^(n+1)
/// ```
///
/// `Q` and `C` keep labels; the measures of the lower cells are computed
/// from the classes `E(i', l)` and from the sizes of the `Γ̃` sets, and the
/// rotation actions on the lower row are verified on the underlying cells.
pub fn lemma_square(rf: &Refinement) -> Result<SquareReport, PartitionError> {
    let prev = &rf.prev;
    let next = &rf.next;
    let q_n = crate::partition::small_q(prev)?;
    let qz = Z::from(q_n);
    let t = prev.t;
    let r = rf.ratio();
    let p = (&prev.p % &qz).to_u64().expect("below q");

    let families: Vec<FamilyClasses> = (0..t)
        .map(|ip| classify_family(rf, ip))
        .collect::<Result<_, _>>()?;
    let shifts: Vec<u64> = prev
        .b
        .iter()
        .map(|b| ((Z::from(p) * b) % &qz).to_u64().expect("below q"))
        .collect();
    let classes_equivariant = families
        .iter()
        .zip(&shifts)
        .all(|(fc, &c)| classes_equivariant(fc, c));

    let qr = next.q.pow(r as u32);
    let mut family_measure: Vec<Vec<Q>> = Vec::with_capacity(t);
    let mut image_measure: Vec<Vec<Q>> = Vec::with_capacity(t);
    for (ip, fc) in families.iter().enumerate() {
        let w = class_weights(rf, fc)?;
        family_measure.push(w.iter().map(|x| Q::new(x.clone(), qr.clone())).collect());
        // The same sums with each length replaced by the size of its Γ̃ set.
        let mut img = vec![Z::zero(); q_n as usize];
        let sizes: Vec<(Z, Z)> = (0..r)
            .map(|s| {
                let a = &next.a[ip * r + s];
                Ok((
                    gamma_tilde_size(a, &next.q, &rf.v)?,
                    gamma_tilde_size(a, &next.q, &rf.rho)?,
                ))
            })
            .collect::<Result<_, PartitionError>>()?;
        let y = fc.classes - u64::from(!rf.rho.is_zero());
        for (idx, &l) in fc.labels.iter().enumerate() {
            let prod = fc
                .digits(idx as u64)
                .iter()
                .enumerate()
                .fold(Z::one(), |acc, (s, &(_, j))| {
                    acc * if j < y { &sizes[s].0 } else { &sizes[s].1 }
                });
            img[l as usize] += prod;
        }
        image_measure.push(img.into_iter().map(|x| Q::new(x, qr.clone())).collect());
    }
    let cell = Q::new(Z::one(), qz.clone());
    let family_measures_uniform = family_measure.iter().flatten().all(|m| *m == cell);

    let tilde_equivariant = tilde_equivariance(rf, &shifts)?;

    let labels = all_labels(q_n, t)?;
    let joint = |per: &[Vec<Q>], l: &Label, h: Option<&[usize]>| -> Q {
        // With `h`, coordinate h(i') of `l` carries family i'.
        (0..t).fold(Q::one(), |acc, ip| {
            let k = h.map_or(ip, |h| h[ip]);
            acc * &per[ip][l[k] as usize]
        })
    };
    let h = rf.h_n();
    let zeta_cell = uniform_measure(q_n, t);

    let top = build_k(prev, rf.t_prev)?;
    let u_action = LabelAction {
        modulus: q_n,
        shift: shifts.clone(),
    };
    let s_action = LabelAction {
        modulus: q_n,
        shift: vec![p; t],
    };
    let lower_zeta: BTreeMap<Label, Q> = labels
        .iter()
        .map(|l| (l.clone(), joint(&family_measure, l, None)))
        .collect();
    let left = AlgebraMap {
        name: "Q".into(),
        assignment: labels.iter().map(|l| (l.clone(), l.clone())).collect(),
        source_measure: labels.iter().map(|l| (l.clone(), zeta_cell.clone())).collect(),
        target_measure: lower_zeta.clone(),
        source_action: Some(u_action.clone()),
        target_action: classes_equivariant.then(|| u_action.clone()),
    };
    let lower_eta: BTreeMap<Label, Q> = labels
        .iter()
        .map(|l| (l.clone(), joint(&image_measure, l, Some(&h))))
        .collect();
    let right = AlgebraMap {
        name: "C".into(),
        assignment: labels.iter().map(|l| (l.clone(), l.clone())).collect(),
        source_measure: labels.iter().map(|l| (l.clone(), zeta_cell.clone())).collect(),
        target_measure: lower_eta.clone(),
        source_action: Some(s_action.clone()),
        target_action: tilde_equivariant.then(|| s_action.clone()),
    };
    let mut bottom = top.clone();
    bottom.name = "K^(n+1)".into();
    bottom.source_measure = lower_zeta;
    bottom.target_measure = lower_eta;
    bottom.target_action = tilde_equivariant.then_some(s_action);

    let diagram = crate::verify_diagram(&bottom, &top, &left, &right)?;
    let maps = vec![top.check(), left.check(), right.check(), bottom.check()];
    Ok(SquareReport {
        n: prev.n,
        q_n,
        t_n: t,
        q_next: next.q.clone(),
        t_next: next.t,
        v: rf.v.clone(),
        y: rf.y.clone(),
        rho: rf.rho.clone(),
        maps,
        diagram,
        classes_equivariant,
        tilde_equivariant,
        family_measures_uniform,
        tuples: families.iter().map(FamilyClasses::tuples).sum(),
        near_ties: families.iter().map(|f| f.near_ties).sum(),
        degenerate: families.iter().map(|f| f.degenerate).sum(),
    })
}

/// For every child `i` and every arc `(γ, j)`: rotating the arc by
/// `p_n b_n(i')/q_n` and applying `K_(n+1)` gives the `K_(n+1)` image of the
/// arc rotated by `p_n/q_n` on the circle.
fn tilde_equivariance(rf: &Refinement, shifts: &[u64]) -> Result<bool, PartitionError> {
    let next = &rf.next;
    let q = next.q.to_u64().filter(|&q| q <= 10_000_000).ok_or_else(|| {
        PartitionError::Budget(format!("q_(n+1) = {} too large for the cell check", next.q))
    })?;
    let m = rf.m.to_u64().expect("below q");
    let p = (&rf.prev.p % &rf.prev.q).to_u64().expect("small");
    let r = rf.ratio();
    let q_n = q / m;
    for i in 0..next.t {
        let a = (&next.a[i] % &next.q).to_u64().expect("below q") as u128;
        let c = shifts[i / r] as u128 * m as u128;
        for g in 0..q_n {
            for j in 0..rf.classes() {
                let start = rf.arc_start(g, j).to_u64().expect("below q") as u128;
                let len = rf.arc_len(j).to_u64().expect("below q") as u128;
                let mut lhs: Vec<u64> = (0..len)
                    .map(|s| (((start + c + s) % q as u128) * a % q as u128) as u64)
                    .collect();
                let mut rhs: Vec<u64> = (0..len)
                    .map(|s| {
                        ((((start + s) * a) % q as u128 + p as u128 * m as u128) % q as u128) as u64
                    })
                    .collect();
                lhs.sort_unstable();
                rhs.sort_unstable();
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
