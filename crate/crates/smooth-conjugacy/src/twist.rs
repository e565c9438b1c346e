//! Area-preserving twists of a rectangle in two coordinates.
//!
//! The rectangle is scaled to `[−1, 1]²`, where the level sets of the p-norm
//! `N_p` are nested rounded squares. In the coordinates `(c, φ)`, with
//! `c = N_p(u)` and `φ` the fraction of the unit ball's area swept from the
//! positive first axis, the area form is a constant times `c dc dφ`. The
//! twist `φ ↦ φ + g(c)` is therefore area preserving. With `g = 1/2` on
//! `c ≤ c_in` it is the half turn `u ↦ −u` there, and with `g = 0` on
//! `c ≥ c_out` it is the identity near the boundary.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use crate::bump::smooth_step;
use crate::map::{wrap, Diffeo};
use crate::ConjugacyError;

/// `∫_0^x (1 + s^p)^(−2/p) ds` for `0 ≤ x ≤ 1`, from the hypergeometric
/// series after a Pfaff transformation (ratio at most 1/2).
pub fn sector_integral(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let w = x.powf(p);
    let zeta = w / (1.0 + w);
    let a = 2.0 / p;
    let c = 1.0 + 1.0 / p;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        term *= (a + k as f64) / (c + k as f64) * zeta;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    x * (1.0 + w).powf(-a) * sum
}

fn sector_integrand(s: f64, p: f64) -> f64 {
    (1.0 + s.powf(p)).powf(-2.0 / p)
}

/// Unit ball of `N_p` in the plane, `p` even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PBall {
    pub p: f64,
    /// `∫_0^1 (1 + s^p)^(−2/p) ds`, equal to the ball's area over 4.
    pub h1: f64,
}

impl PBall {
    pub fn new(p: u32) -> Self {
        let p = p as f64;
        PBall {
            p,
            h1: sector_integral(1.0, p),
        }
    }

    /// Fraction of `[−1, 1]²` covered by the ball.
    pub fn fill(&self) -> f64 {
        self.h1
    }

    pub fn norm(&self, u: [f64; 2]) -> f64 {
        let (a, b) = (u[0].abs(), u[1].abs());
        let m = a.max(b);
        if m == 0.0 {
            return 0.0;
        }
        let r = a.min(b) / m;
        m * (1.0 + r.powf(self.p)).powf(1.0 / self.p)
    }

    /// Radius of the unit ball in direction `θ`.
    fn radius(&self, theta: f64) -> f64 {
        1.0 / self.norm([theta.cos(), theta.sin()])
    }

    fn hinv(&self, y: f64) -> f64 {
        let mut s = y.min(1.0);
        for _ in 0..60 {
            let step = (sector_integral(s, self.p) - y) / sector_integrand(s, self.p);
            s = (s - step).clamp(0.0, 1.0);
            if step.abs() < 1e-17 {
                break;
            }
        }
        s
    }

    /// Area fraction of the sector from angle 0 to `θ`.
    pub fn angle_to_fraction(&self, theta: f64) -> f64 {
        let th = theta.rem_euclid(TAU);
        let k = ((th / FRAC_PI_2).floor() as i64).clamp(0, 3);
        let t = th - k as f64 * FRAC_PI_2;
        let norm = 8.0 * self.h1;
        let f0 = if t <= FRAC_PI_4 {
            sector_integral(t.tan(), self.p) / norm
        } else {
            0.25 - sector_integral((FRAC_PI_2 - t).tan(), self.p) / norm
        };
        k as f64 / 4.0 + f0
    }

    pub fn fraction_to_angle(&self, phi: f64) -> f64 {
        let f = phi.rem_euclid(1.0);
        let k = ((4.0 * f).floor() as i64).clamp(0, 3);
        let f0 = f - k as f64 / 4.0;
        let norm = 8.0 * self.h1;
        let t = if f0 <= 0.125 {
            self.hinv(norm * f0).atan()
        } else {
            FRAC_PI_2 - self.hinv(norm * (0.25 - f0)).atan()
        };
        k as f64 * FRAC_PI_2 + t
    }
}

/// Profile `g(c) = amount · (1 − S((c − c_in)/(c_out − c_in)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistProfile {
    pub ball: PBall,
    pub c_in: f64,
    pub c_out: f64,
    /// Turn fraction applied on `c ≤ c_in`; 1/2 swaps the two halves.
    pub amount: f64,
}

impl TwistProfile {
    /// The swap profile whose exception (points not sent by the half turn)
    /// covers at most `eps` of the rectangle.
    pub fn swap(eps: f64) -> Result<Self, ConjugacyError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ConjugacyError::Precondition(format!(
                "exception budget {eps} outside (0, 1)"
            )));
        }
        let mut p = 4;
        let ball = loop {
            let b = PBall::new(p);
            if b.fill() >= 1.0 - eps / 2.0 {
                break b;
            }
            p += 2;
            if p > 20_000 {
                return Err(ConjugacyError::Budget(format!(
                    "no p-norm exponent for eps = {eps}"
                )));
            }
        };
        let c_in = ((1.0 - eps) / ball.fill()).sqrt();
        Ok(TwistProfile {
            ball,
            c_in,
            c_out: 1.0 - (1.0 - c_in) / 10.0,
            amount: 0.5,
        })
    }

    /// Area fraction of the rectangle outside the half-turn core.
    pub fn exception(&self) -> f64 {
        1.0 - self.c_in * self.c_in * self.ball.fill()
    }

    fn g(&self, c: f64) -> f64 {
        if c <= self.c_in {
            self.amount
        } else if c >= self.c_out {
            0.0
        } else {
            self.amount * (1.0 - smooth_step((c - self.c_in) / (self.c_out - self.c_in)))
        }
    }

    /// Twists `u ∈ [−1, 1]²` by `sign · g`. Returns false when `u` is fixed.
    pub fn twist(&self, u: &mut [f64; 2], sign: f64) -> bool {
        let c = self.ball.norm(*u);
        if c == 0.0 {
            return false;
        }
        let g = self.g(c);
        if g == 0.0 {
            return false;
        }
        let phi = self.ball.angle_to_fraction(u[1].atan2(u[0]));
        let th = self.ball.fraction_to_angle(phi + sign * g);
        let r = c * self.ball.radius(th);
        *u = [r * th.cos(), r * th.sin()];
        true
    }
}

/// Twists of the rectangles `[c/n_j, (c+2)/n_j) × [m/n_k, (m+1)/n_k)` for
/// every active pair start `c` and every partner cell `m`. With the swap
/// profile the two `x_j` cells of each active pair trade places on the
/// half-turn cores, and every partner cell is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistLayer {
    pub dim: usize,
    pub j: usize,
    pub k: usize,
    pub n_j: u64,
    pub n_k: u64,
    pub active: Vec<bool>,
    pub profile: TwistProfile,
}

impl TwistLayer {
    pub fn new(
        dim: usize,
        j: usize,
        k: usize,
        n_j: u64,
        n_k: u64,
        starts: &[u64],
        profile: TwistProfile,
    ) -> Result<Self, ConjugacyError> {
        if j == 0 || j >= dim || k >= dim || j == k || n_j < 2 || n_k == 0 {
            return Err(ConjugacyError::Precondition(format!(
                "twist on (x_{j}, x_{k}) with {n_j} × {n_k} cells in dimension {dim}"
            )));
        }
        let mut active = vec![false; n_j as usize];
        for &c in starts {
            if c + 1 >= n_j || active[c as usize] {
                return Err(ConjugacyError::Precondition(format!("bad pair start {c}")));
            }
            active[c as usize] = true;
        }
        if active.windows(2).any(|w| w[0] && w[1]) {
            return Err(ConjugacyError::Precondition("pairs overlap".into()));
        }
        Ok(TwistLayer {
            dim,
            j,
            k,
            n_j,
            n_k,
            active,
            profile,
        })
    }

    fn run(&self, x: &mut [f64], sign: f64) {
        let sj = x[self.j] * self.n_j as f64;
        if !(sj >= 0.0 && sj < self.n_j as f64) {
            return;
        }
        let cj = sj.floor() as usize;
        let c0 = if self.active[cj] {
            cj
        } else if cj > 0 && self.active[cj - 1] {
            cj - 1
        } else {
            return;
        };
        let sk = x[self.k] * self.n_k as f64;
        if !(sk >= 0.0 && sk < self.n_k as f64) {
            return;
        }
        let ck = sk.floor();
        let mut u = [sj - c0 as f64 - 1.0, 2.0 * (sk - ck) - 1.0];
        if self.profile.twist(&mut u, sign) {
            x[self.j] = (c0 as f64 + 1.0 + u[0]) / self.n_j as f64;
            let xk = (ck + (u[1] + 1.0) / 2.0) / self.n_k as f64;
            x[self.k] = if self.k == 0 { wrap(xk) } else { xk };
        }
    }

    /// Number of active pairs.
    pub fn pairs(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

impl Diffeo for TwistLayer {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &mut [f64]) {
        self.run(x, 1.0)
    }
    fn apply_inv(&self, x: &mut [f64]) {
        self.run(x, -1.0)
    }
    fn moves(&self) -> BTreeSet<usize> {
        [self.j, self.k].into()
    }
    fn depends(&self) -> BTreeSet<usize> {
        [self.j, self.k].into()
    }
}
