use std::f64::consts::TAU;

use gk_base::{par, Z};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::{cut_rotate, PathEnsemble, RotationSpec, WienerError};

/// Width of the band around sector boundaries, in turns, inside which a
/// float argument is reported as ambiguous.
pub const BOUNDARY_BAND: f64 = 1e-9;

/// Argument of `z` in turns, in `[0, 1)`.
pub fn turns(z: Complex64) -> f64 {
    let t = z.im.atan2(z.re) / TAU;
    let t = if t < 0.0 { t + 1.0 } else { t };
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

/// Sector `l = ⌊q · turns⌋` and whether the argument lies within
/// [`BOUNDARY_BAND`] of a sector boundary.
pub fn sector(z: Complex64, q: u64) -> (u64, bool) {
    let t = turns(z);
    let x = t * q as f64;
    let l = (x.floor() as u64).min(q - 1);
    let lo = l as f64 / q as f64;
    let hi = (l + 1) as f64 / q as f64;
    let near = (t - lo).abs() < BOUNDARY_BAND || (hi - t).abs() < BOUNDARY_BAND;
    (l, near)
}

/// Symbols `(i, l)` of every path: `cells[w · t + i]` is the sector of
/// piece `i` of path `w`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbols {
    pub pieces: usize,
    pub q: u64,
    pub cells: Vec<u64>,
    pub ambiguous: Vec<bool>,
}

pub fn classify(ens: &PathEnsemble, spec: &RotationSpec, q: u64) -> Result<Symbols, WienerError> {
    if q == 0 {
        return Err(WienerError::Spec("q must be at least 1".into()));
    }
    let pieces = spec.grid_pieces(ens.depth())?;
    let t = pieces.len();
    let rows = par::map_range(ens.count(), |w| {
        pieces
            .iter()
            .map(|r| sector(ens.sum(w, r.clone()), q))
            .collect::<Vec<_>>()
    });
    let mut cells = Vec::with_capacity(ens.count() * t);
    let mut ambiguous = Vec::with_capacity(ens.count() * t);
    for row in rows {
        for (l, a) in row {
            cells.push(l);
            ambiguous.push(a);
        }
    }
    Ok(Symbols {
        pieces: t,
        q,
        cells,
        ambiguous,
    })
}

/// The shift `p_n b_n(i) mod q_n` of each piece under `U_n`.
pub fn stage_shifts(stage: &StageParams) -> Result<Vec<u64>, WienerError> {
    stage
        .b
        .iter()
        .map(|b| {
            let r: Z = (&stage.p * b) % &stage.q;
            r.to_u64()
                .ok_or_else(|| WienerError::Budget("q_n does not fit in 64 bits".into()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftLawReport {
    pub power: i64,
    pub pieces: u64,
    /// Pieces in the boundary band before or after the map.
    pub excluded: u64,
    pub mismatches: u64,
    /// `1 − mismatches / (pieces − excluded)`.
    pub agreement: f64,
    pub excluded_fraction: f64,
}

/// Compares `classify(U^p ens)` with `classify(ens)` shifted by
/// `p · shift_i mod q`, piece by piece.
pub fn shift_law(
    ens: &PathEnsemble,
    spec: &RotationSpec,
    q: u64,
    shifts: &[u64],
    power: i64,
) -> Result<ShiftLawReport, WienerError> {
    if shifts.len() != spec.pieces() {
        return Err(WienerError::Spec("one shift per piece required".into()));
    }
    let before = classify(ens, spec, q)?;
    let after = classify(&cut_rotate(ens, spec, power)?, spec, q)?;
    let t = before.pieces;
    let mut excluded = 0u64;
    let mut mismatches = 0u64;
    for idx in 0..before.cells.len() {
        if before.ambiguous[idx] || after.ambiguous[idx] {
            excluded += 1;
            continue;
        }
        let s = (power as i128 * shifts[idx % t] as i128).rem_euclid(q as i128) as u64;
        if (before.cells[idx] + s) % q != after.cells[idx] {
            mismatches += 1;
        }
    }
    let pieces = before.cells.len() as u64;
    let kept = (pieces - excluded).max(1) as f64;
    Ok(ShiftLawReport {
        power,
        pieces,
        excluded,
        mismatches,
        agreement: 1.0 - mismatches as f64 / kept,
        excluded_fraction: excluded as f64 / pieces as f64,
    })
}

/// Empirical `P(l_i = l)` per piece, as a `t × q` table.
pub fn marginal_frequencies(s: &Symbols) -> Vec<Vec<f64>> {
    let n = (s.cells.len() / s.pieces.max(1)) as f64;
    let mut f = vec![vec![0.0; s.q as usize]; s.pieces];
    for (idx, &l) in s.cells.iter().enumerate() {
        f[idx % s.pieces][l as usize] += 1.0;
    }
    for row in &mut f {
        for x in row.iter_mut() {
            *x /= n;
        }
    }
    f
}

/// Empirical joint `P(l_i = a, l_j = b)` as a `q × q` table.
pub fn joint_frequencies(s: &Symbols, i: usize, j: usize) -> Vec<Vec<f64>> {
    let paths = s.cells.len() / s.pieces.max(1);
    let q = s.q as usize;
    let mut f = vec![vec![0.0; q]; q];
    for w in 0..paths {
        f[s.cells[w * s.pieces + i] as usize][s.cells[w * s.pieces + j] as usize] += 1.0;
    }
    for row in &mut f {
        for x in row.iter_mut() {
            *x /= paths as f64;
        }
    }
    f
}
