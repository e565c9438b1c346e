use std::collections::BTreeMap;

use gk_base::{Q, Z};
use kronecker_set::IntervalSet;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::{PartitionError, Region};

/// Cell label: one integer per sub-partition.
pub type Label = Vec<u64>;

/// Largest number of cells materialised geometrically.
pub const CELL_CAP: u64 = 100_000;

/// Largest raster used by the exact disjointness check.
const RASTER_CAP: u128 = 4_000_000;

/// A finite partition with exact geometric cells. Axis `k` of every region is
/// the coordinate `dims[k]` (0 is the circle, `i ≥ 1` the cube coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPartition {
    pub dims: Vec<usize>,
    pub cells: BTreeMap<Label, Region>,
}

impl CellPartition {
    pub fn new(dims: Vec<usize>, cells: BTreeMap<Label, Region>) -> Result<Self, PartitionError> {
        if let Some((l, r)) = cells.iter().find(|(_, r)| r.dim() != dims.len()) {
            return Err(PartitionError::Shape(format!(
                "cell {l:?} has dimension {}, expected {}",
                r.dim(),
                dims.len()
            )));
        }
        Ok(CellPartition { dims, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn measure(&self, label: &[u64]) -> Option<Q> {
        self.cells.get(label).map(Region::measure)
    }

    pub fn total_measure(&self) -> Q {
        self.cells.values().fold(Q::zero(), |acc, r| acc + r.measure())
    }

    pub fn axis(&self, coord: usize) -> Option<usize> {
        self.dims.iter().position(|&d| d == coord)
    }

    /// Every cell nonempty, measures summing to 1 and cells pairwise
    /// disjoint. Reports the first offending label.
    pub fn check(&self) -> Result<(), PartitionError> {
        if let Some((l, _)) = self.cells.iter().find(|(_, r)| r.is_empty()) {
            return Err(PartitionError::Invalid(format!("cell {l:?} is empty")));
        }
        let total = self.total_measure();
        if !total.is_one() {
            return Err(PartitionError::Invalid(format!(
                "cell measures sum to {total}, not 1"
            )));
        }
        if let Some((a, b)) = self.first_overlap()? {
            return Err(PartitionError::Invalid(format!(
                "cells {a:?} and {b:?} overlap"
            )));
        }
        Ok(())
    }

    /// First pair of overlapping cells, by a raster of the common grid when
    /// it is small enough, else pairwise.
    pub fn first_overlap(&self) -> Result<Option<(Label, Label)>, PartitionError> {
        let dim = self.dims.len();
        let mut grid = vec![Z::one(); dim];
        for r in self.cells.values() {
            for b in r.boxes() {
                for (k, side) in b.iter().enumerate() {
                    for s in side.spans() {
                        grid[k] = grid[k].lcm(s.lo.denom()).lcm(s.hi.denom());
                    }
                }
            }
        }
        let size = grid
            .iter()
            .try_fold(1u128, |acc, g| g.to_u128().and_then(|g| acc.checked_mul(g)));
        match size {
            Some(n) if n <= RASTER_CAP => Ok(self.raster_overlap(&grid, n as usize)),
            _ => self.pairwise_overlap(),
        }
    }

    fn raster_overlap(&self, grid: &[Z], size: usize) -> Option<(Label, Label)> {
        let g: Vec<u64> = grid.iter().map(|x| x.to_u64().expect("small grid")).collect();
        let labels: Vec<&Label> = self.cells.keys().collect();
        let mut owner = vec![u32::MAX; size];
        for (idx, r) in self.cells.values().enumerate() {
            for b in r.boxes() {
                let ranges: Vec<Vec<(u64, u64)>> = b
                    .iter()
                    .zip(&g)
                    .map(|(side, &gk)| {
                        side.spans()
                            .iter()
                            .map(|s| (grid_index(&s.lo, gk), grid_index(&s.hi, gk)))
                            .collect()
                    })
                    .collect();
                let mut hit = None;
                for_each_cell(&ranges, &g, &mut |flat| {
                    if hit.is_some() {
                        return;
                    }
                    let o = owner[flat];
                    if o != u32::MAX && o as usize != idx {
                        hit = Some(o as usize);
                    } else {
                        owner[flat] = idx as u32;
                    }
                });
                if let Some(o) = hit {
                    return Some((labels[o].clone(), labels[idx].clone()));
                }
            }
        }
        None
    }

    fn pairwise_overlap(&self) -> Result<Option<(Label, Label)>, PartitionError> {
        let n = self.cells.len() as u64;
        if n.saturating_mul(n) > 4 * CELL_CAP * CELL_CAP / 1000 {
            return Err(PartitionError::Budget(format!(
                "pairwise disjointness check over {n} cells"
            )));
        }
        let cells: Vec<(&Label, &Region)> = self.cells.iter().collect();
        for (i, (la, ra)) in cells.iter().enumerate() {
            for (lb, rb) in &cells[i + 1..] {
                if !ra.intersection(rb).measure().is_zero() {
                    return Ok(Some(((*la).clone(), (*lb).clone())));
                }
            }
        }
        Ok(None)
    }
}

fn grid_index(x: &Q, g: u64) -> u64 {
    (x * Q::from_integer(Z::from(g)))
        .to_integer()
        .to_u64()
        .expect("grid point")
}

/// Visits the flat indices of a product of index ranges (row-major, axis 0
/// slowest).
fn for_each_cell(ranges: &[Vec<(u64, u64)>], g: &[u64], f: &mut impl FnMut(usize)) {
    fn rec(
        k: usize,
        acc: usize,
        ranges: &[Vec<(u64, u64)>],
        g: &[u64],
        f: &mut impl FnMut(usize),
    ) {
        if k == ranges.len() {
            f(acc);
            return;
        }
        for &(lo, hi) in &ranges[k] {
            for x in lo..hi {
                rec(k + 1, acc * g[k] as usize + x as usize, ranges, g, f);
            }
        }
    }
    rec(0, 0, ranges, g, f);
}

pub(crate) fn small_q(stage: &StageParams) -> Result<u64, PartitionError> {
    stage
        .q
        .to_u64()
        .filter(|&q| q <= CELL_CAP)
        .ok_or_else(|| PartitionError::Budget(format!("q = {} exceeds {CELL_CAP}", stage.q)))
}

fn cell(k: u64, q: u64) -> IntervalSet {
    IntervalSet::arc(
        &Q::new(Z::from(k % q), Z::from(q)),
        &Q::new(Z::one(), Z::from(q)),
    )
}

/// The cell `Δ_n(i, l)` of the sub-partition `η_(n,i)`, on the axes
/// `0..t_n`. For `i = 0` it is the circle sector `l`; for `i ≥ 1` it is the set
/// where the circle cell index minus the `x_i` cell index is `l` mod `q_n`.
pub fn eta_component(stage: &StageParams, i: usize, l: u64) -> Result<Region, PartitionError> {
    let q = small_q(stage)?;
    let t = stage.t;
    if i >= t || l >= q {
        return Err(PartitionError::Precondition(format!(
            "component ({i}, {l}) outside t = {t}, q = {q}"
        )));
    }
    if i == 0 {
        let mut sides = vec![IntervalSet::full(); t];
        sides[0] = cell(l, q);
        return Ok(Region::cuboid(sides));
    }
    let boxes = (0..q)
        .map(|j| {
            let mut sides = vec![IntervalSet::full(); t];
            sides[0] = cell(l + j, q);
            sides[i] = cell(j, q);
            sides
        })
        .collect();
    Ok(Region::from_disjoint(t, boxes))
}

/// All labels of `Z_q^t` in lexicographic order.
pub fn all_labels(q: u64, t: usize) -> Result<Vec<Label>, PartitionError> {
    let count = q
        .checked_pow(t as u32)
        .filter(|&c| c <= CELL_CAP)
        .ok_or_else(|| {
            PartitionError::Budget(format!("{q}^{t} cells exceed the cap {CELL_CAP}"))
        })?;
    Ok((0..count)
        .map(|mut idx| {
            let mut l = vec![0; t];
            for k in (0..t).rev() {
                l[k] = idx % q;
                idx /= q;
            }
            l
        })
        .collect())
}

/// The joint partition `η_n`: the cell with label `λ` is the box with circle
/// cell `λ_0` and `x_i` cell `λ_0 − λ_i`.
pub fn build_eta(stage: &StageParams) -> Result<CellPartition, PartitionError> {
    let q = small_q(stage)?;
    let t = stage.t;
    let mut cells = BTreeMap::new();
    for l in all_labels(q, t)? {
        let mut sides = Vec::with_capacity(t);
        sides.push(cell(l[0], q));
        for li in &l[1..] {
            sides.push(cell(l[0] + q - li, q));
        }
        cells.insert(l, Region::cuboid(sides));
    }
    CellPartition::new((0..t).collect(), cells)
}

/// Exact structural checks of `η_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaReport {
    pub cells: u64,
    /// Every joint cell is the intersection of its components.
    pub joint_consistent: bool,
    /// `μ(A ∩ B) = μ(A) μ(B)` for cells of distinct sub-partitions.
    pub independent: bool,
    /// Rotation of the circle by `1/q_n` maps `Δ_n(i, l)` to `Δ_n(i, l + 1)`.
    pub stable_unit: bool,
    /// Rotation by `p_n/q_n` maps `Δ_n(i, l)` to `Δ_n(i, l + p_n)`.
    pub stable_rotation: bool,
}

impl EtaReport {
    pub fn all(&self) -> bool {
        self.joint_consistent && self.independent && self.stable_unit && self.stable_rotation
    }
}

pub fn check_eta(stage: &StageParams) -> Result<EtaReport, PartitionError> {
    let eta = build_eta(stage)?;
    eta.check()?;
    let q = small_q(stage)?;
    let t = stage.t;
    let comps: Vec<Vec<Region>> = (0..t)
        .map(|i| (0..q).map(|l| eta_component(stage, i, l)).collect())
        .collect::<Result<_, _>>()?;
    let joint_consistent = eta.cells.iter().all(|(l, r)| {
        let mut acc = Region::full(t);
        for (i, &li) in l.iter().enumerate() {
            acc = acc.intersection(&comps[i][li as usize]);
        }
        acc.same_set(r)
    });
    let q2 = Q::new(Z::one(), Z::from(q * q));
    let mut independent = true;
    'outer: for i in 0..t {
        for j in i + 1..t {
            for a in &comps[i] {
                for b in &comps[j] {
                    if a.intersection(b).measure() != q2 {
                        independent = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    let shift_matches = |step: &Q, k: u64| {
        (0..t).all(|i| {
            (0..q).all(|l| {
                comps[i][l as usize]
                    .translate(0, step)
                    .same_set(&comps[i][((l + k) % q) as usize])
            })
        })
    };
    let p = (&stage.p % &stage.q).to_u64().expect("p mod q fits");
    Ok(EtaReport {
        cells: eta.len() as u64,
        joint_consistent,
        independent,
        stable_unit: shift_matches(&Q::new(Z::one(), Z::from(q)), 1),
        stable_rotation: shift_matches(&Q::new(Z::from(p), Z::from(q)), p),
    })
}
