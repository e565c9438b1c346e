use std::f64::consts::TAU;
use std::io::{self, Read, Write};
use std::sync::Arc;

use gk_base::rational::serde_str;
use gk_base::{frac, par, to_f64, Q, Z};
use kronecker_set::AtomicMeasure;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::WienerError;

/// Largest `count · 2^depth` accepted by [`sample_paths`].
pub const MAX_INCREMENTS: u64 = 1 << 28;

/// `N` planar Brownian paths sampled on the grid `j/2^K`.
///
/// The sampled increments are kept untouched in `base`; the rotations
/// applied by [`cut_rotate`] are stored as an exact angle (in turns) per grid
/// increment, shared by all paths. The increment of path `w` on
/// `[j/2^K, (j+1)/2^K)` is `base[w][j] · e^(2iπ phase[j])`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    depth: u32,
    count: usize,
    seed: u64,
    base: Arc<Vec<Complex64>>,
    phase: Vec<Q>,
    factor: Vec<Option<Complex64>>,
}

/// Cut times `0 = u_0 < … < u_t = 1` and angles `α_1, …, α_t` in turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationSpec {
    #[serde(with = "serde_str::rat_vec")]
    pub cut_times: Vec<Q>,
    #[serde(with = "serde_str::rat_vec")]
    pub angles: Vec<Q>,
}

impl RotationSpec {
    pub fn new(cut_times: Vec<Q>, angles: Vec<Q>) -> Result<Self, WienerError> {
        let bad = |m: String| Err(WienerError::Spec(m));
        if cut_times.len() != angles.len() + 1 || angles.is_empty() {
            return bad(format!(
                "{} cut times for {} angles",
                cut_times.len(),
                angles.len()
            ));
        }
        if !cut_times[0].is_zero() || cut_times[cut_times.len() - 1] != Q::from_integer(Z::from(1))
        {
            return bad("cut times must run from 0 to 1".into());
        }
        if cut_times.windows(2).any(|w| w[0] >= w[1]) {
            return bad("cut times must increase strictly".into());
        }
        Ok(RotationSpec {
            cut_times,
            angles: angles.iter().map(frac).collect(),
        })
    }

    /// Pieces of length `m_k` in atom order, rotated by the atom positions.
    pub fn from_measure(m: &AtomicMeasure) -> Result<Self, WienerError> {
        let mut cuts = vec![Q::zero()];
        for a in m.atoms() {
            let last = cuts.last().expect("nonempty").clone();
            cuts.push(last + &a.weight);
        }
        Self::new(cuts, m.atoms().iter().map(|a| a.position.clone()).collect())
    }

    /// `t_n` equal pieces rotated by `(p_n/q_n) b_n(i)`: the map `U_n`.
    pub fn from_stage(stage: &StageParams) -> Result<Self, WienerError> {
        let t = stage.t as i64;
        let cuts = (0..=t).map(|k| gk_base::q(k, t)).collect();
        let r = Q::new(stage.p.clone(), stage.q.clone());
        Self::new(
            cuts,
            stage
                .b
                .iter()
                .map(|b| &r * Q::from_integer(b.clone()))
                .collect(),
        )
    }

    pub fn pieces(&self) -> usize {
        self.angles.len()
    }

    pub fn weights(&self) -> Vec<Q> {
        self.cut_times.windows(2).map(|w| &w[1] - &w[0]).collect()
    }

    /// Grid index ranges of the pieces at depth `K`.
    pub fn grid_pieces(&self, depth: u32) -> Result<Vec<std::ops::Range<usize>>, WienerError> {
        let scale = Q::from_integer(Z::from(1u64) << depth);
        let idx: Vec<usize> = self
            .cut_times
            .iter()
            .map(|u| {
                let x = u * &scale;
                if x.is_integer() {
                    Ok(x.to_integer().to_usize().expect("index below 2^depth"))
                } else {
                    Err(WienerError::NotDyadic {
                        time: u.to_string(),
                        depth,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(idx.windows(2).map(|w| w[0]..w[1]).collect())
    }
}

fn factor_of(phase: &Q) -> Option<Complex64> {
    if phase.is_zero() {
        None
    } else {
        Some(Complex64::from_polar(1.0, TAU * to_f64(phase)))
    }
}

/// Samples `count` independent paths. Path `w` draws from its own ChaCha8
/// stream `(seed, w)`, so the ensemble does not depend on the worker count.
/// Each coordinate of an increment is `N(0, 2^−K)`, so `E|B_1|² = 2` and
/// `E[(Re B_1)²] = 1`.
pub fn sample_paths(depth: u32, count: usize, seed: u64) -> Result<PathEnsemble, WienerError> {
    if depth == 0 || count == 0 {
        return Err(WienerError::Spec(
            "depth and count must be at least 1".into(),
        ));
    }
    let m = 1u64
        .checked_shl(depth)
        .filter(|&m| depth < 40 && m.saturating_mul(count as u64) <= MAX_INCREMENTS)
        .ok_or_else(|| {
            WienerError::Budget(format!(
                "{count} paths at depth {depth} exceed {MAX_INCREMENTS} increments"
            ))
        })? as usize;
    let sd = (m as f64).sqrt().recip();
    let rows = par::map_range(count, |w| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(w as u64);
        (0..m)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * sd, im * sd)
            })
            .collect::<Vec<_>>()
    });
    let base: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(PathEnsemble {
        depth,
        count,
        seed,
        base: Arc::new(base),
        phase: vec![Q::zero(); m],
        factor: vec![None; m],
    })
}

impl PathEnsemble {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of grid increments `2^K`.
    pub fn steps(&self) -> usize {
        self.phase.len()
    }

    pub fn phases(&self) -> &[Q] {
        &self.phase
    }

    #[inline]
    pub fn increment(&self, path: usize, j: usize) -> Complex64 {
        let z = self.base[path * self.steps() + j];
        match self.factor[j] {
            None => z,
            Some(f) => z * f,
        }
    }

    /// `B_(hi/2^K) − B_(lo/2^K)`, summed left to right.
    pub fn sum(&self, path: usize, range: std::ops::Range<usize>) -> Complex64 {
        range.fold(Complex64::zero(), |acc, j| acc + self.increment(path, j))
    }

    pub fn endpoint(&self, path: usize) -> Complex64 {
        self.sum(path, 0..self.steps())
    }

    /// Positions `B_(j/2^K)` for `j = 0..=2^K`, as prefix sums.
    pub fn positions(&self, path: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut acc = Complex64::zero();
        out.push(acc);
        for j in 0..self.steps() {
            acc += self.increment(path, j);
            out.push(acc);
        }
        out
    }

    /// Writes the sampled increments and the exact phases.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"GKPE")?;
        w.write_all(&self.depth.to_le_bytes())?;
        w.write_all(&(self.count as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for p in &self.phase {
            let s = p.to_string();
            w.write_all(&(s.len() as u32).to_le_bytes())?;
            w.write_all(s.as_bytes())?;
        }
        for z in self.base.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"GKPE" {
            return Err(bad("not an ensemble dump"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let depth = u32::from_le_bytes(b4);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        if depth == 0 || depth >= 40 || (count as u64) << depth > MAX_INCREMENTS {
            return Err(bad("ensemble size out of range"));
        }
        let m = 1usize << depth;
        let mut phase = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut b4)?;
            let mut s = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut s)?;
            let s = String::from_utf8(s).map_err(|_| bad("phase is not utf-8"))?;
            phase.push(gk_base::parse_q(&s).map_err(|_| bad("bad phase"))?);
        }
        let mut base = Vec::with_capacity(m * count);
        for _ in 0..m * count {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            base.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        let factor = phase.iter().map(factor_of).collect();
        Ok(PathEnsemble {
            depth,
            count,
            seed,
            base: Arc::new(base),
            phase,
            factor,
        })
    }
}

/// `B ∘ U_σ^p`: the increments of piece `k` are rotated by `p α_k`.
///
/// Angles are accumulated exactly, so `cut_rotate(·, p)` followed by
/// `cut_rotate(·, −p)` restores the input bit for bit.
pub fn cut_rotate(
    ens: &PathEnsemble,
    spec: &RotationSpec,
    power: i64,
) -> Result<PathEnsemble, WienerError> {
    let pieces = spec.grid_pieces(ens.depth)?;
    let mut phase = ens.phase.clone();
    let pz = Q::from_integer(Z::from(power));
    for (k, r) in pieces.into_iter().enumerate() {
        let turn = &pz * &spec.angles[k];
        for j in r {
            phase[j] = frac(&(&phase[j] + &turn));
        }
    }
    let factor = phase.iter().map(factor_of).collect();
    Ok(PathEnsemble {
        depth: ens.depth,
        count: ens.count,
        seed: ens.seed,
        base: Arc::clone(&ens.base),
        phase,
        factor,
    })
}

impl PartialEq for PathEnsemble {
    /// Equality of every materialised increment, bit for bit.
    fn eq(&self, other: &Self) -> bool {
        self.depth == other.depth
            && self.count == other.count
            && (0..self.count).all(|w| {
                (0..self.steps()).all(|j| {
                    let (a, b) = (self.increment(w, j), other.increment(w, j));
                    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
                })
            })
    }
}
