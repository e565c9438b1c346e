use std::f64::consts::TAU;

use gk_base::{par, to_f64, Q, Z};
use serde::{Deserialize, Serialize};

use crate::{cut_rotate, PathEnsemble, RotationSpec, WienerError};

/// Mean and standard error of the sample `f(0), …, f(n−1)`.
pub fn mean_se(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> (f64, f64) {
    let s = par::sum_range_vec(n, 2, |i| {
        let x = f(i);
        vec![x, x * x]
    });
    let nf = n as f64;
    let mean = s[0] / nf;
    let var = (s[1] / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    (mean, (var / nf).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub p: i64,
    pub empirical: f64,
    pub std_error: f64,
    /// `Σ m_k cos(2π p α_k) · E[(Re B_1)²]` with `E[(Re B_1)²] = 1`.
    pub analytic: f64,
    /// The terms `(m_k, p α_k mod 1)` of the analytic sum.
    pub terms: Vec<(String, String)>,
    pub z_score: f64,
}

/// Compares the sample mean of `Re(B_1 ∘ U^p) · Re(B_1)` with the
/// covariance of the Gaussian process of the symmetrised measure.
pub fn covariance_check(
    ens: &PathEnsemble,
    spec: &RotationSpec,
    p: i64,
) -> Result<CovarianceReport, WienerError> {
    let rotated = cut_rotate(ens, spec, p)?;
    let (empirical, std_error) =
        mean_se(ens.count(), |w| rotated.endpoint(w).re * ens.endpoint(w).re);
    let pz = Q::from_integer(Z::from(p));
    let mut analytic = 0.0;
    let mut terms = Vec::new();
    for (m, a) in spec.weights().iter().zip(&spec.angles) {
        let turn = gk_base::frac(&(&pz * a));
        analytic += to_f64(m) * (TAU * to_f64(&turn)).cos();
        terms.push((gk_base::fmt_q(m), gk_base::fmt_q(&turn)));
    }
    let z_score = if std_error > 0.0 {
        (empirical - analytic).abs() / std_error
    } else if empirical == analytic {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CovarianceReport {
        p,
        empirical,
        std_error,
        analytic,
        terms,
        z_score,
    })
}

/// Per grid increment: sample means and standard errors of
/// `(Re Δ)², (Im Δ)², Re Δ · Im Δ`.
pub fn increment_moments(ens: &PathEnsemble) -> Vec<[(f64, f64); 3]> {
    (0..ens.steps())
        .map(|j| {
            let re2 = mean_se(ens.count(), |w| ens.increment(w, j).re.powi(2));
            let im2 = mean_se(ens.count(), |w| ens.increment(w, j).im.powi(2));
            let cross = mean_se(ens.count(), |w| {
                let z = ens.increment(w, j);
                z.re * z.im
            });
            [re2, im2, cross]
        })
        .collect()
}
