//! `A = A_(t_n − 1) ∘ … ∘ A_0` at a desk-scale stage and its property report.

use std::sync::Arc;

use gk_base::{par, Z};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{jacobian_deviation, norm_at, Grid, GridDiffeo, NormReport};
use crate::map::{image, Composition, Diffeo, Rotation};
use crate::quasi::{quasi_permutation, transport_fraction, CubeCells};
use crate::ConjugacyError;

pub const MAX_DIMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssembleConfig {
    /// Exception budget for all factors together.
    pub eps: f64,
    /// Cells per cube axis.
    pub cells: u64,
    /// Grid nodes per axis.
    pub res: usize,
    /// Largest derivative order measured for the norm.
    pub norm_order: usize,
    pub norm_res: usize,
    /// Extra uniform points for the norm, drawn from `seed`. The twist bands
    /// are thin and a coarse grid can miss them.
    pub norm_samples: usize,
    pub seed: u64,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            eps: 0.25,
            cells: 5,
            res: 16,
            norm_order: 2,
            norm_res: 6,
            norm_samples: 4096,
            seed: 0,
        }
    }
}

/// Child `i` of family `i'` moves the cells of its axis by
/// `m ↦ a_(n+1)(i) · m mod cells`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub family: usize,
    pub child: usize,
    pub axis: usize,
    pub sigma: Vec<u64>,
    pub layers: usize,
    pub exception_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AReport {
    pub q_n: u64,
    pub dims: usize,
    pub nodes: usize,
    pub factors: Vec<Factor>,
    /// Children whose coordinate lies beyond the truncation.
    pub truncated_children: usize,
    /// `max |A(S x) − S(A x)|` with `S = S_(1/q_n)`.
    pub equivariance_residual: f64,
    pub transport_fraction: f64,
    pub exception_bound: f64,
    pub eps: f64,
    pub jacobian_max_dev: f64,
    pub inverse_residual: f64,
    pub untouched_exact: bool,
    pub norm: NormReport,
}

impl AReport {
    pub fn passed(&self) -> bool {
        self.equivariance_residual <= 1e-9
            && self.transport_fraction >= 1.0 - self.eps
            && self.jacobian_max_dev <= 1e-3
            && self.inverse_residual <= 1e-9
            && self.untouched_exact
            && self.norm.value.is_finite()
    }
}

pub struct Assembled {
    pub map: Arc<dyn Diffeo>,
    pub cells: CubeCells,
    pub sampled: GridDiffeo,
    pub report: AReport,
}

/// `max |A(S_α x) − S_α(A x)|` over the grid nodes.
pub fn equivariance_residual(map: &dyn Diffeo, grid: &Grid, alpha: f64) -> f64 {
    let s = Rotation {
        dim: grid.dim(),
        alpha,
    };
    par::map_range(grid.len(), |i| {
        let x = grid.node(i);
        let a = image(map, &image(&s, &x));
        let b = image(&s, &image(map, &x));
        crate::grid::dist(&a, &b)
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Measures every property of a candidate `A` for stage `prev`: `expected`
/// gives the target cell of each cell.
pub fn check_candidate(
    map: Arc<dyn Diffeo>,
    q_n: u64,
    cells: &CubeCells,
    expected: impl Fn(&[u64]) -> Vec<u64> + Sync + Send,
    cfg: &AssembleConfig,
    exception_bound: f64,
) -> Result<(GridDiffeo, AReport), ConjugacyError> {
    let dims = map.dim();
    let grid = Grid::uniform(dims, cfg.res)?;
    let sampled = GridDiffeo::sample(map.clone(), grid.clone())?;
    let norm_grid = Grid::uniform(dims, cfg.norm_res)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<Vec<f64>> = (0..norm_grid.len())
        .map(|i| norm_grid.node(i))
        .chain((0..cfg.norm_samples).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()))
        .collect();
    let report = AReport {
        q_n,
        dims,
        nodes: grid.len(),
        factors: Vec::new(),
        truncated_children: 0,
        equivariance_residual: equivariance_residual(map.as_ref(), &grid, 1.0 / q_n as f64),
        transport_fraction: transport_fraction(map.as_ref(), &grid, cells, expected),
        exception_bound,
        eps: cfg.eps,
        jacobian_max_dev: jacobian_deviation(map.as_ref(), &grid, 1e-6),
        inverse_residual: sampled.inverse_residual(),
        untouched_exact: sampled.untouched_exact(),
        norm: norm_at(map.as_ref(), &points, cfg.norm_order),
    };
    Ok((sampled, report))
}

/// Builds `A` for the step from `prev` to children with multipliers
/// `a_next` (`t_(n+1)` of them), truncated to the first [`MAX_DIMS`]
/// coordinates.
pub fn assemble_a(
    prev: &StageParams,
    a_next: &[Z],
    cfg: &AssembleConfig,
) -> Result<Assembled, ConjugacyError> {
    let q_n = prev
        .q
        .to_u64()
        .filter(|&q| q <= 1_000)
        .ok_or_else(|| ConjugacyError::Budget(format!("q_n = {} for a grid map", prev.q)))?;
    let t_n = prev.t;
    let t_next = a_next.len();
    if !t_next.is_multiple_of(t_n) || t_next == t_n {
        return Err(ConjugacyError::Precondition(format!(
            "{t_next} children for {t_n} parents"
        )));
    }
    let r = t_next / t_n;
    let dims = t_next.min(MAX_DIMS);
    let n = cfg.cells;
    let nz = Z::from(n);
    let mut counts = vec![n; dims];
    counts[0] = q_n;
    let cells = CubeCells { counts };
    // h(r j + k) = j + t_n k
    let coord = |i: usize| i / r + t_n * (i % r);
    let mut plan = Vec::new();
    let mut truncated = 0;
    for (i, a) in a_next.iter().enumerate() {
        let h = coord(i);
        if h == 0 {
            continue;
        }
        if h >= dims {
            truncated += 1;
            continue;
        }
        let am = a.mod_floor(&nz);
        if !am.gcd(&nz).is_one() {
            return Err(ConjugacyError::Precondition(format!(
                "a({i}) = {a} is not invertible mod {n} cells"
            )));
        }
        let am = am.to_u64().expect("below cells");
        plan.push((
            i / r,
            i,
            h,
            (0..n).map(|m| m * am % n).collect::<Vec<u64>>(),
        ));
    }
    let total_layers: usize = plan
        .iter()
        .map(|p| crate::quasi::transposition_layers(&p.3).map(|l| l.len()))
        .sum::<Result<usize, _>>()?;
    let per_layer = cfg.eps / (total_layers.max(1) as f64) / 2.0;
    let mut factors = Vec::new();
    let mut maps: Vec<Arc<dyn Diffeo>> = Vec::new();
    let mut bound = 0.0;
    for (family, child, axis, sigma) in plan {
        let layers = crate::quasi::transposition_layers(&sigma)?.len();
        let qp = quasi_permutation(&sigma, &cells, axis, 0, per_layer * layers.max(1) as f64)?;
        bound += qp.exception_bound;
        maps.push(qp.map(dims));
        factors.push(Factor {
            family,
            child,
            axis,
            sigma,
            layers,
            exception_bound: qp.exception_bound,
        });
    }
    let map: Arc<dyn Diffeo> = Arc::new(Composition::new(dims, maps));
    let targets: Vec<(usize, Vec<u64>)> =
        factors.iter().map(|f| (f.axis, f.sigma.clone())).collect();
    let expected = move |l: &[u64]| {
        let mut out = l.to_vec();
        for (axis, sigma) in &targets {
            out[*axis] = sigma[l[*axis] as usize];
        }
        out
    };
    let (sampled, mut report) = check_candidate(map.clone(), q_n, &cells, expected, cfg, bound)?;
    report.factors = factors;
    report.truncated_children = truncated;
    Ok(Assembled {
        map,
        cells,
        sampled,
        report,
    })
}
