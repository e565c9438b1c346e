//! Quasi-permutations: smooth measure-preserving maps that move the cells of
//! a uniform product grid by a given permutation, off a small exception set.

use std::sync::Arc;

use gk_base::par;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::map::{image, Composition, Diffeo};
use crate::twist::{TwistLayer, TwistProfile};
use crate::ConjugacyError;

/// Uniform cells: `counts[c]` cells of equal width on axis `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeCells {
    pub counts: Vec<u64>,
}

impl CubeCells {
    pub fn label(&self, x: &[f64]) -> Vec<u64> {
        self.counts
            .iter()
            .zip(x)
            .map(|(&n, &v)| ((v * n as f64).floor().max(0.0) as u64).min(n - 1))
            .collect()
    }
}

/// Rounds of adjacent swaps (odd-even transposition sort) carrying the
/// content of cell `m` to cell `sigma[m]`.
pub fn transposition_layers(sigma: &[u64]) -> Result<Vec<Vec<u64>>, ConjugacyError> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    for &s in sigma {
        if s as usize >= n || seen[s as usize] {
            return Err(ConjugacyError::Precondition(
                "sigma is not a permutation".into(),
            ));
        }
        seen[s as usize] = true;
    }
    let mut arr = sigma.to_vec();
    let mut layers = Vec::new();
    for round in 0..n {
        let mut swaps = Vec::new();
        let mut c = round % 2;
        while c + 1 < n {
            if arr[c] > arr[c + 1] {
                arr.swap(c, c + 1);
                swaps.push(c as u64);
            }
            c += 2;
        }
        if !swaps.is_empty() {
            layers.push(swaps);
        }
    }
    debug_assert!(arr.windows(2).all(|w| w[0] < w[1]));
    Ok(layers)
}

/// A quasi-permutation along one cube axis.
#[derive(Debug, Clone)]
pub struct QuasiPermutation {
    pub axis: usize,
    pub partner: usize,
    pub sigma: Vec<u64>,
    pub layers: Vec<TwistLayer>,
    /// Union bound on the exception measure.
    pub exception_bound: f64,
}

impl QuasiPermutation {
    pub fn map(&self, dim: usize) -> Arc<dyn Diffeo> {
        Arc::new(Composition::new(
            dim,
            self.layers
                .iter()
                .map(|l| Arc::new(l.clone()) as Arc<dyn Diffeo>)
                .collect(),
        ))
    }
}

/// Moves the cells of axis `axis` by `sigma` (the same for every label on
/// the other axes), using twists in the plane of `axis` and `partner`. The
/// partner cells are preserved. Each layer gets exception budget
/// `eps / layers`.
pub fn quasi_permutation(
    sigma: &[u64],
    cells: &CubeCells,
    axis: usize,
    partner: usize,
    eps: f64,
) -> Result<QuasiPermutation, ConjugacyError> {
    let dim = cells.counts.len();
    if axis == 0 || axis >= dim || partner >= dim || partner == axis {
        return Err(ConjugacyError::Precondition(format!(
            "axis {axis} with partner {partner} in dimension {dim}"
        )));
    }
    let n = cells.counts[axis];
    if sigma.len() as u64 != n {
        return Err(ConjugacyError::Precondition(format!(
            "sigma has {} entries for {n} cells",
            sigma.len()
        )));
    }
    let rounds = transposition_layers(sigma)?;
    let per = if rounds.is_empty() {
        eps
    } else {
        eps / rounds.len() as f64
    };
    let profile = TwistProfile::swap(per)?;
    let layers = rounds
        .iter()
        .map(|starts| {
            TwistLayer::new(
                dim,
                axis,
                partner,
                n,
                cells.counts[partner],
                starts,
                profile,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let moved_fraction = |l: &TwistLayer| 2.0 * l.pairs() as f64 / n as f64;
    let exception_bound = layers
        .iter()
        .map(|l| moved_fraction(l) * profile.exception())
        .sum();
    Ok(QuasiPermutation {
        axis,
        partner,
        sigma: sigma.to_vec(),
        layers,
        exception_bound,
    })
}

/// Fraction of grid nodes whose image lies in the expected cell.
pub fn transport_fraction(
    map: &dyn Diffeo,
    grid: &Grid,
    cells: &CubeCells,
    expected: impl Fn(&[u64]) -> Vec<u64> + Sync + Send,
) -> f64 {
    let good = par::map_range(grid.len(), |i| {
        let x = grid.node(i);
        let want = expected(&cells.label(&x));
        (cells.label(&image(map, &x)) == want) as u64
    })
    .into_iter()
    .sum::<u64>();
    good as f64 / grid.len() as f64
}
