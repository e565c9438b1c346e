//! Grid sampling of maps and the finite-difference measurements on it.

use std::collections::BTreeSet;
use std::sync::Arc;

use gk_base::par;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::map::{circle_diff, image, preimage, Diffeo};
use crate::ConjugacyError;

/// Largest number of grid nodes.
pub const NODE_CAP: usize = 4_000_000;

/// Cell-centred nodes `(k + 1/2)/res[c]` on every axis, row-major with axis 0
/// slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub res: Vec<usize>,
}

impl Grid {
    pub fn new(res: Vec<usize>) -> Result<Self, ConjugacyError> {
        let n = res
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&n| n > 0 && n <= NODE_CAP);
        match n {
            Some(_) => Ok(Grid { res }),
            None => Err(ConjugacyError::Budget(format!(
                "grid {res:?} exceeds {NODE_CAP} nodes"
            ))),
        }
    }

    pub fn uniform(dim: usize, res: usize) -> Result<Self, ConjugacyError> {
        Self::new(vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, mut idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for c in (0..self.dim()).rev() {
            let r = self.res[c];
            x[c] = ((idx % r) as f64 + 0.5) / r as f64;
            idx /= r;
        }
        x
    }
}

/// A map with its forward and inverse images at every grid node and its
/// declared J-sets.
#[derive(Debug, Clone)]
pub struct GridDiffeo {
    pub grid: Grid,
    pub forward: Vec<f64>,
    pub inverse: Vec<f64>,
    pub moves: BTreeSet<usize>,
    pub depends: BTreeSet<usize>,
    pub map: Arc<dyn Diffeo>,
}

impl GridDiffeo {
    pub fn sample(map: Arc<dyn Diffeo>, grid: Grid) -> Result<Self, ConjugacyError> {
        if map.dim() != grid.dim() {
            return Err(ConjugacyError::Precondition(format!(
                "map of dimension {} on a {}-dimensional grid",
                map.dim(),
                grid.dim()
            )));
        }
        let rows: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(grid.len(), |i| {
            let x = grid.node(i);
            (image(map.as_ref(), &x), preimage(map.as_ref(), &x))
        });
        let mut forward = Vec::with_capacity(grid.len() * grid.dim());
        let mut inverse = Vec::with_capacity(grid.len() * grid.dim());
        for (f, b) in rows {
            forward.extend(f);
            inverse.extend(b);
        }
        Ok(GridDiffeo {
            moves: map.moves(),
            depends: map.depends(),
            grid,
            forward,
            inverse,
            map,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn image_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.forward[i * d..(i + 1) * d]
    }

    pub fn preimage_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.inverse[i * d..(i + 1) * d]
    }

    /// `max |B^(−1)(B(x)) − x|` and `max |B(B^(−1)(x)) − x|` over nodes.
    pub fn inverse_residual(&self) -> f64 {
        let m = self.map.as_ref();
        let res = par::map_range(self.grid.len(), |i| {
            let x = self.grid.node(i);
            let a = dist(&preimage(m, self.image_at(i)), &x);
            let b = dist(&image(m, self.preimage_at(i)), &x);
            a.max(b)
        });
        res.into_iter().fold(0.0, f64::max)
    }

    /// The coordinates outside `moves` are returned bit-for-bit.
    pub fn untouched_exact(&self) -> bool {
        par::all_range(self.grid.len(), |i| {
            let x = self.grid.node(i);
            let f = self.image_at(i);
            let b = self.preimage_at(i);
            (0..self.dim()).all(|c| self.moves.contains(&c) || (f[c] == x[c] && b[c] == x[c]))
        })
    }
}

/// Sup distance with the circle coordinate taken mod 1.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(c, (x, y))| {
            if c == 0 {
                circle_diff(*x, *y).abs()
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Nested central difference of `map` along the listed axes (an axis may
/// repeat) with step `h`. The circle component of every sample is lifted to
/// the representative nearest the image of `x`.
pub fn derivative(map: &dyn Diffeo, x: &[f64], axes: &[usize], h: f64) -> Vec<f64> {
    let d = x.len();
    let base = image(map, x);
    let m = axes.len();
    let mut acc = vec![0.0; d];
    for signs in 0..(1usize << m) {
        let mut y = x.to_vec();
        let mut parity = 1.0;
        for (b, &a) in axes.iter().enumerate() {
            if signs >> b & 1 == 1 {
                y[a] += h;
            } else {
                y[a] -= h;
                parity = -parity;
            }
        }
        let f = image(map, &y);
        for c in 0..d {
            let v = if c == 0 {
                base[0] + circle_diff(f[0], base[0])
            } else {
                f[c]
            };
            acc[c] += parity * v;
        }
    }
    let scale = (2.0 * h).powi(m as i32);
    acc.iter().map(|v| v / scale).collect()
}

/// Determinant of the finite-difference Jacobian at `x`.
pub fn jacobian_det(map: &dyn Diffeo, x: &[f64], h: f64) -> f64 {
    let d = x.len();
    let cols: Vec<Vec<f64>> = (0..d).map(|a| derivative(map, x, &[a], h)).collect();
    DMatrix::from_fn(d, d, |r, c| cols[c][r]).determinant()
}

/// `max |det DB − 1|` over the nodes.
pub fn jacobian_deviation(map: &dyn Diffeo, grid: &Grid, h: f64) -> f64 {
    par::map_range(grid.len(), |i| {
        (jacobian_det(map, &grid.node(i), h) - 1.0).abs()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// `‖B‖_k = max_(0 < |j| ≤ k) max_x |D^j B(x)|`, measured at grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub k: usize,
    pub value: f64,
    /// Maximum per derivative order `1..=k`.
    pub by_order: Vec<f64>,
    pub step: f64,
    pub nodes: usize,
}

/// Multi-indices of order `m` on `d` axes, as sorted axis lists.
pub fn multi_indices(d: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, m: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for a in from..d {
            cur.push(a);
            rec(d, m, a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, m, 0, &mut Vec::new(), &mut out);
    out
}

/// Step for order-`m` nested differences: roughly optimal balance of
/// truncation and rounding for unit-scale derivatives.
pub fn default_step(m: usize) -> f64 {
    match m {
        0 | 1 => 1e-6,
        2 => 1e-4,
        _ => 2e-3,
    }
}

pub fn norm(map: &dyn Diffeo, grid: &Grid, k: usize) -> NormReport {
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    norm_at(map, &points, k)
}

/// [`norm`] over arbitrary sample points.
pub fn norm_at(map: &dyn Diffeo, points: &[Vec<f64>], k: usize) -> NormReport {
    let d = points.first().map_or(map.dim(), |p| p.len());
    let mut by_order = Vec::with_capacity(k);
    for m in 1..=k {
        let idx = multi_indices(d, m);
        let h = default_step(m);
        let best = par::map_slice(points, |x| {
            idx.iter()
                .flat_map(|a| derivative(map, x, a, h))
                .map(f64::abs)
                .fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max);
        by_order.push(best);
    }
    NormReport {
        k,
        value: by_order.iter().copied().fold(0.0, f64::max),
        by_order,
        step: default_step(k),
        nodes: points.len(),
    }
}

/// `max(‖B‖_k, ‖B^(−1)‖_k)`.
pub fn norm_both(map: Arc<dyn Diffeo>, grid: &Grid, k: usize) -> f64 {
    let inv = crate::map::Inverse(map.clone());
    norm(map.as_ref(), grid, k)
        .value
        .max(norm(&inv, grid, k).value)
}
