use gk_base::{par, Q, Z};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::{TorusError, TorusVector};

/// Guards for the exhaustive grid search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridBudget {
    /// Largest torus dimension searched without an explicit override.
    pub max_dim: usize,
    /// Largest number of grid nodes.
    pub max_nodes: u64,
    /// Largest `nodes × points × dim` product.
    pub max_work: u64,
}

impl Default for GridBudget {
    fn default() -> Self {
        GridBudget {
            max_dim: 4,
            max_nodes: 20_000_000,
            max_work: 20_000_000_000,
        }
    }
}

/// Integer form of a point set on a common denominator.
struct Prepared {
    dim: usize,
    /// Common denominator `N`; every coordinate is an integer in `[0, N)`.
    den: u128,
    /// Grid size per axis; nodes sit at multiples of `N / g`.
    g: u64,
    nodes: u64,
    pts: Vec<u128>,
}

const DEN_CAP_BITS: u64 = 100;

fn prepare(
    points: &[TorusVector],
    resolution: &Q,
    budget: &GridBudget,
) -> Result<Prepared, TorusError> {
    let first = points.first().ok_or(TorusError::Empty)?;
    let dim = first.dim();
    if dim == 0 {
        return Err(TorusError::Precondition("zero-dimensional torus".into()));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(TorusError::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    if !resolution.is_positive() || resolution > &Q::one() {
        return Err(TorusError::BadResolution);
    }
    if dim > budget.max_dim {
        return Err(TorusError::DimensionCap {
            dim,
            cap: budget.max_dim,
        });
    }
    // g = ceil(1/h): spacing 1/g ≤ h.
    let inv = Q::one() / resolution;
    let g_big = inv.ceil().to_integer();
    let g = g_big
        .to_u64()
        .ok_or_else(|| TorusError::Budget("grid size does not fit in 64 bits".into()))?;
    let nodes = (g as u128)
        .checked_pow(dim as u32)
        .filter(|&x| x <= budget.max_nodes as u128)
        .ok_or_else(|| {
            TorusError::Budget(format!(
                "{g}^{dim} grid nodes exceed the cap {}",
                budget.max_nodes
            ))
        })? as u64;
    let work = nodes as u128 * points.len() as u128 * dim as u128;
    if work > budget.max_work as u128 {
        return Err(TorusError::Budget(format!(
            "grid work {work} exceeds the cap {}",
            budget.max_work
        )));
    }
    let mut den = g_big.clone();
    for p in points {
        for c in p.coords() {
            den = den.lcm(c.denom());
        }
    }
    if den.bits() > DEN_CAP_BITS {
        return Err(TorusError::Budget(format!(
            "common denominator has {} bits (cap {DEN_CAP_BITS})",
            den.bits()
        )));
    }
    let den_u = den.to_u128().expect("checked above");
    let mut pts = Vec::with_capacity(points.len() * dim);
    for p in points {
        for c in p.coords() {
            let v: Z = c.numer() * (&den / c.denom());
            pts.push(v.to_u128().expect("coordinate in [0, N)"));
        }
    }
    Ok(Prepared {
        dim,
        den: den_u,
        g,
        nodes,
        pts,
    })
}

impl Prepared {
    #[inline]
    fn circ(&self, a: u128, b: u128) -> u128 {
        let d = a.abs_diff(b);
        d.min(self.den - d)
    }

    /// Sup-metric distance (times `N`) from node `idx` to the point set,
    /// or `None` as soon as it is known to exceed `cut`.
    fn node_dist(&self, idx: u64, cut: Option<u128>) -> u128 {
        let step = self.den / self.g as u128;
        let mut coords = [0u128; 16];
        let mut rest = idx;
        let mut heap;
        let c: &mut [u128] = if self.dim <= 16 {
            &mut coords[..self.dim]
        } else {
            heap = vec![0u128; self.dim];
            &mut heap[..]
        };
        for slot in c.iter_mut() {
            *slot = (rest % self.g) as u128 * step;
            rest /= self.g;
        }
        let mut best = u128::MAX;
        for p in self.pts.chunks_exact(self.dim) {
            let mut m = 0u128;
            for k in 0..self.dim {
                m = m.max(self.circ(c[k], p[k]));
                if m >= best {
                    break;
                }
            }
            if m < best {
                best = m;
                if let Some(cut) = cut {
                    if best <= cut {
                        break;
                    }
                }
                if best == 0 {
                    break;
                }
            }
        }
        best
    }

    fn half_spacing(&self) -> Q {
        Q::new(Z::one(), Z::from(2 * self.g))
    }
}

/// Upper bound on the covering radius of `points` with the default budget.
pub fn covering_radius(points: &[TorusVector], resolution: &Q) -> Result<Q, TorusError> {
    covering_radius_with(points, resolution, &GridBudget::default())
}

/// Returns `R̂ = max_node dist(node, points) + 1/(2g)` where `g = ⌈1/h⌉`.
/// `R̂` is an upper bound for the sup-metric covering radius and exceeds it
/// by at most `h/2`.
pub fn covering_radius_with(
    points: &[TorusVector],
    resolution: &Q,
    budget: &GridBudget,
) -> Result<Q, TorusError> {
    let pr = prepare(points, resolution, budget)?;
    let worst = par_max(&pr);
    Ok(Q::new(Z::from(worst), Z::from(pr.den)) + pr.half_spacing())
}

fn par_max(pr: &Prepared) -> u128 {
    // Chunk the node range so the parallel map sees moderately sized tasks.
    const CHUNK: u64 = 4096;
    let chunks = pr.nodes.div_ceil(CHUNK) as usize;
    par::max_range(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(pr.nodes);
        (lo..hi).map(|i| pr.node_dist(i, None)).max().unwrap_or(0)
    })
    .unwrap_or(0)
}

/// `true` iff the bound `R̂` of [`covering_radius_with`] is strictly larger
/// than `threshold`. Stops at the first offending node.
pub fn exceeds_radius(
    points: &[TorusVector],
    resolution: &Q,
    budget: &GridBudget,
    threshold: &Q,
) -> Result<bool, TorusError> {
    let pr = prepare(points, resolution, budget)?;
    let slack = (threshold - pr.half_spacing()) * Q::from_integer(Z::from(pr.den));
    if slack.is_negative() {
        return Ok(true);
    }
    // A node offends iff its integer distance d satisfies d > slack.
    let cut = slack.floor().to_integer().to_u128().unwrap_or(u128::MAX);
    const CHUNK: u64 = 4096;
    let chunks = pr.nodes.div_ceil(CHUNK) as usize;
    let hit = par::find_first(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(pr.nodes);
        (lo..hi).any(|i| pr.node_dist(i, Some(cut)) > cut)
    });
    Ok(hit.is_some())
}
