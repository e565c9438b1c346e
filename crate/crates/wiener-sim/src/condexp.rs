use std::collections::BTreeMap;

use gk_base::{par, to_f64, Q, Z};
use kronecker_set::IntervalSet;
use num_complex::Complex64;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::symbols::turns;
use crate::{PathEnsemble, WienerError};

/// A partition of the circle of arguments (in turns) into labelled cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorFamily {
    cells: Vec<IntervalSet>,
    /// `(lo, label)` of every span, sorted by `lo`, for float lookup.
    table: Vec<(f64, u32)>,
}

impl SectorFamily {
    pub fn new(cells: Vec<IntervalSet>) -> Result<Self, WienerError> {
        let mut union = IntervalSet::empty();
        let mut total = Q::from_integer(Z::from(0));
        for c in &cells {
            union = union.union(c);
            total += c.measure();
        }
        if union != IntervalSet::full() || !total.is_one() {
            return Err(WienerError::Spec("cells must partition the circle".into()));
        }
        let mut table: Vec<(f64, u32)> = cells
            .iter()
            .enumerate()
            .flat_map(|(l, c)| c.spans().iter().map(move |s| (to_f64(&s.lo), l as u32)))
            .collect();
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(SectorFamily { cells, table })
    }

    /// The single cell `T`.
    pub fn trivial() -> Self {
        Self::new(vec![IntervalSet::full()]).expect("full circle")
    }

    /// `[l/q, (l+1)/q)` for `l < q`.
    pub fn uniform(q: u64) -> Self {
        let q = q.max(1) as i64;
        Self::new(
            (0..q)
                .map(|l| IntervalSet::from_intervals([(gk_base::q(l, q), gk_base::q(l + 1, q))]))
                .collect(),
        )
        .expect("uniform sectors partition the circle")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn label(&self, z: Complex64) -> u32 {
        let t = turns(z);
        let idx = self.table.partition_point(|s| s.0 <= t);
        // Spans cover [0, 1), so the candidate before `idx` holds `t`.
        self.table[idx.saturating_sub(1)].1
    }
}

/// Grid increments `start .. start + len` at the ensemble depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub start: usize,
    pub len: usize,
}

impl Word {
    /// The word of `W` at level `|W|`, index `i`, for an ensemble of depth `K`.
    pub fn dyadic(level: u32, index: usize, depth: u32) -> Result<Self, WienerError> {
        if level > depth || index >= 1 << level {
            return Err(WienerError::Spec(format!(
                "no word {index} at level {level} of depth {depth}"
            )));
        }
        let len = 1usize << (depth - level);
        Ok(Word {
            start: index * len,
            len,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub label: Vec<u32>,
    pub count: u64,
    pub mean: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondExpReport {
    pub cells: Vec<CellEstimate>,
    /// Product of the family sizes.
    pub total_cells: f64,
    /// Cells with no path; they get no estimate.
    pub empty_cells: f64,
    /// Tolerance on arguments, in turns.
    pub eta: f64,
    /// Fraction of held-out paths with `dist(arg E[B_W | cell], arg B_W) ≤ η`.
    /// Cell means come from the even-indexed paths and are scored on the
    /// odd-indexed ones, so a cell holding a single path cannot score itself.
    pub diagnostic_fraction: f64,
    pub holdout_scored: u64,
    /// Odd paths whose cell has no even path.
    pub holdout_excluded: u64,
    pub holdout_residual: f64,
    /// In-sample mean of `|B_W − E[B_W | cell]|²` over all paths.
    pub l2_residual: f64,
}

/// Cell means of `values` grouped by `labels`, and the per-path estimate.
fn group_means(
    values: &[Complex64],
    labels: &[Vec<u32>],
) -> (BTreeMap<Vec<u32>, (Complex64, u64)>, Vec<Complex64>) {
    let mut acc: BTreeMap<Vec<u32>, (Complex64, u64)> = BTreeMap::new();
    // Path order is fixed, so the float sums do not depend on scheduling.
    for (v, l) in values.iter().zip(labels) {
        let e = acc
            .entry(l.clone())
            .or_insert((Complex64::new(0.0, 0.0), 0));
        e.0 += v;
        e.1 += 1;
    }
    for e in acc.values_mut() {
        e.0 /= e.1 as f64;
    }
    let est = labels.iter().map(|l| acc[l].0).collect();
    (acc, est)
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Monte Carlo `E[B_W | A]` where `A` is generated by the sectors of the
/// arguments of `families.len()` equal sub-increments of `W`.
pub fn cond_exp(
    ens: &PathEnsemble,
    word: Word,
    families: &[SectorFamily],
    eta: f64,
) -> Result<CondExpReport, WienerError> {
    let m = families.len();
    if word.len == 0 || word.start + word.len > ens.steps() {
        return Err(WienerError::Spec("word outside the grid".into()));
    }
    if m == 0 || !word.len.is_multiple_of(m) {
        return Err(WienerError::Spec(format!(
            "{m} sub-increments do not divide a word of {} grid steps",
            word.len
        )));
    }
    let sub = word.len / m;
    let rows = par::map_range(ens.count(), |w| {
        let parts: Vec<Complex64> = (0..m)
            .map(|k| ens.sum(w, word.start + k * sub..word.start + (k + 1) * sub))
            .collect();
        let total = parts.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        let label: Vec<u32> = parts
            .iter()
            .zip(families)
            .map(|(z, f)| f.label(*z))
            .collect();
        (total, label)
    });
    let (values, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let (acc, est) = group_means(&values, &labels);
    let n = values.len() as f64;
    let resid: Vec<f64> = values
        .iter()
        .zip(&est)
        .map(|(v, e)| (v - e).norm_sqr())
        .collect();

    // Held-out diagnostic: cell means from even paths, scored on odd paths.
    let train: Vec<usize> = (0..values.len()).step_by(2).collect();
    let (acc_train, _) = group_means(
        &train.iter().map(|&i| values[i]).collect::<Vec<_>>(),
        &train.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>(),
    );
    let mut hits = 0usize;
    let mut scored = 0usize;
    let mut excluded = 0usize;
    let mut held = Vec::new();
    for i in (1..values.len()).step_by(2) {
        match acc_train.get(&labels[i]) {
            None => excluded += 1,
            Some((e, _)) => {
                scored += 1;
                if circ(turns(*e), turns(values[i])) <= eta {
                    hits += 1;
                }
                held.push((values[i] - e).norm_sqr());
            }
        }
    }
    let total_cells: f64 = families.iter().map(|f| f.len() as f64).product();
    Ok(CondExpReport {
        empty_cells: total_cells - acc.len() as f64,
        cells: acc
            .into_iter()
            .map(|(label, (mean, count))| CellEstimate {
                label,
                count,
                mean: (mean.re, mean.im),
            })
            .collect(),
        total_cells,
        eta,
        diagnostic_fraction: hits as f64 / scored.max(1) as f64,
        holdout_scored: scored as u64,
        holdout_excluded: excluded as u64,
        holdout_residual: par::pairwise_sum(&held) / scored.max(1) as f64,
        l2_residual: par::pairwise_sum(&resid) / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicProbeReport {
    pub p: u32,
    pub q: u64,
    /// Cells of `A_p(q)` and of `B_p(q) = A_0(q) ∨ … ∨ A_p(q)` hit by paths.
    pub cells_a: usize,
    pub cells_b: usize,
    /// Sample mean of `|E[B_1 | B_p(q)] − E[B_1 | A_p(q)]|²`.
    pub u_hat: f64,
    /// Sampling noise of `u_hat` when the two expectations agree: mean over
    /// paths of the squared standard errors of both cell means.
    pub noise_floor: f64,
    pub residual_a: f64,
    pub residual_b: f64,
}

/// Probe of the identity `E[B_1 | A_p(q)] = E[B_1 | B_p(q)]`, where `A_k(q)`
/// is generated by the sectors of the `2^k` increments of level `k`.
/// Only reports the discrepancy; it does not assume either value.
pub fn dyadic_probe(ens: &PathEnsemble, p: u32, q: u64) -> Result<DyadicProbeReport, WienerError> {
    if p > ens.depth() {
        return Err(WienerError::Spec(format!(
            "level {p} is deeper than the grid"
        )));
    }
    let fam = SectorFamily::uniform(q);
    let k = ens.depth();
    let rows = par::map_range(ens.count(), |w| {
        let mut la = Vec::new();
        let mut lb = Vec::new();
        for level in 0..=p {
            let len = 1usize << (k - level);
            for i in 0..1usize << level {
                let l = fam.label(ens.sum(w, i * len..(i + 1) * len));
                lb.push(l);
                if level == p {
                    la.push(l);
                }
            }
        }
        (ens.endpoint(w), la, lb)
    });
    let values: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    let la: Vec<Vec<u32>> = rows.iter().map(|r| r.1.clone()).collect();
    let lb: Vec<Vec<u32>> = rows.iter().map(|r| r.2.clone()).collect();
    let (acc_a, est_a) = group_means(&values, &la);
    let (acc_b, est_b) = group_means(&values, &lb);
    let n = values.len() as f64;
    // Within-cell variances for the noise floor.
    let var_of =
        |acc: &BTreeMap<Vec<u32>, (Complex64, u64)>, labels: &[Vec<u32>], est: &[Complex64]| {
            let mut ss: BTreeMap<&Vec<u32>, f64> = BTreeMap::new();
            for ((v, l), e) in values.iter().zip(labels).zip(est) {
                *ss.entry(l).or_insert(0.0) += (v - e).norm_sqr();
            }
            labels
                .iter()
                .map(|l| {
                    let c = acc[l].1 as f64;
                    if c > 1.0 {
                        ss[l] / (c - 1.0) / c
                    } else {
                        0.0
                    }
                })
                .collect::<Vec<f64>>()
        };
    let va = var_of(&acc_a, &la, &est_a);
    let vb = var_of(&acc_b, &lb, &est_b);
    let diff: Vec<f64> = est_a
        .iter()
        .zip(&est_b)
        .map(|(a, b)| (a - b).norm_sqr())
        .collect();
    let noise: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| a + b).collect();
    let ra: Vec<f64> = values
        .iter()
        .zip(&est_a)
        .map(|(v, e)| (v - e).norm_sqr())
        .collect();
    let rb: Vec<f64> = values
        .iter()
        .zip(&est_b)
        .map(|(v, e)| (v - e).norm_sqr())
        .collect();
    Ok(DyadicProbeReport {
        p,
        q,
        cells_a: acc_a.len(),
        cells_b: acc_b.len(),
        u_hat: par::pairwise_sum(&diff) / n,
        noise_floor: par::pairwise_sum(&noise) / n,
        residual_a: par::pairwise_sum(&ra) / n,
        residual_b: par::pairwise_sum(&rb) / n,
    })
}
