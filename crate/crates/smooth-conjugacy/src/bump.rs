//! The smooth step and plateau functions built from it.

use serde::{Deserialize, Serialize};

use crate::ConjugacyError;

/// `exp(−1/s)/(exp(−1/s) + exp(−1/(1−s)))` on `(0, 1)`, 0 below, 1 above.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        // Divide through by exp(−1/s) to stay finite near both ends.
        1.0 / (1.0 + (1.0 / s - 1.0 / (1.0 - s)).exp())
    }
}

pub fn smooth_step_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let e = (1.0 / s - 1.0 / (1.0 - s)).exp();
    if !e.is_finite() {
        return 0.0;
    }
    let ds = 1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s));
    e * ds / ((1.0 + e) * (1.0 + e))
}

/// A box product of smooth windows: 1 at distance at least `eps/2` inside
/// the box in every coordinate, 0 on the boundary and outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub bounds: Vec<(f64, f64)>,
    pub eps: f64,
}

pub fn plateau(eps: f64, bounds: &[(f64, f64)]) -> Result<Plateau, ConjugacyError> {
    if !(eps > 0.0) {
        return Err(ConjugacyError::Precondition("eps must be positive".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(hi > lo) || eps >= (hi - lo) / 2.0 {
            return Err(ConjugacyError::Precondition(format!(
                "eps = {eps} is not below half the width of side {k} ({lo}, {hi})"
            )));
        }
    }
    Ok(Plateau {
        bounds: bounds.to_vec(),
        eps,
    })
}

impl Plateau {
    fn margin(&self) -> f64 {
        self.eps / 2.0
    }

    fn window(&self, k: usize, x: f64) -> (f64, f64) {
        let (lo, hi) = self.bounds[k];
        let w = self.margin();
        let (a, b) = ((x - lo) / w, (hi - x) / w);
        let v = smooth_step(a) * smooth_step(b);
        let d = (smooth_step_deriv(a) * smooth_step(b) - smooth_step(a) * smooth_step_deriv(b)) / w;
        (v, d)
    }

    /// Value at `x`; coordinates beyond the box dimension are ignored.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.bounds.len())
            .map(|k| self.window(k, x[k]).0)
            .product()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let parts: Vec<(f64, f64)> = (0..self.bounds.len())
            .map(|k| self.window(k, x[k]))
            .collect();
        (0..parts.len())
            .map(|k| {
                parts
                    .iter()
                    .enumerate()
                    .map(|(m, p)| if m == k { p.1 } else { p.0 })
                    .product()
            })
            .collect()
    }
}
