use gk_base::Z;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::StageError;

/// Rule for the exponent `R_t(n, q_n, t_n)` in `t_(n+1) = 2^R_t · t_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ExponentRule {
    /// `R_t = n + offset`.
    StagePlus { offset: u32 },
    /// `R_t = value` at every stage.
    Constant { value: u32 },
}

/// Growth functions of the construction, stored as plain data so that they
/// can be written into every output file.
///
/// * `R_t` from [`ExponentRule`].
/// * `R_conv = conv_scale · 2^n · q_n · Π b_(n+1) · (n + 1)`.
/// * `R_domain = domain_base + n`, the search box for `(v, e)`.
/// * `d_floor = max(d_min, smallest d with q_n (1 + d Π b) ≥ R_conv)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthPolicy {
    pub t_exponent: ExponentRule,
    pub conv_scale: u64,
    pub domain_base: u64,
    pub d_min: u64,
    /// How many times `d` may be bumped while looking for a `p_(n+1)` that
    /// meets the closeness bound.
    pub max_d_bumps: u64,
}

impl Default for GrowthPolicy {
    fn default() -> Self {
        GrowthPolicy {
            t_exponent: ExponentRule::StagePlus { offset: 1 },
            conv_scale: 1,
            domain_base: 2,
            d_min: 1,
            max_d_bumps: 10_000,
        }
    }
}

impl GrowthPolicy {
    pub fn validate(&self) -> Result<(), StageError> {
        let bad = |m: &str| Err(StageError::Policy(m.to_string()));
        match self.t_exponent {
            ExponentRule::StagePlus { offset } if offset == 0 => {
                bad("R_t = n + 0 vanishes at n = 0")
            }
            ExponentRule::Constant { value } if value == 0 => bad("R_t must be at least 1"),
            _ if self.conv_scale == 0 => bad("conv_scale must be at least 1"),
            _ if self.domain_base == 0 => bad("domain_base must be at least 1"),
            _ if self.d_min == 0 => bad("d_min must be at least 1"),
            _ => Ok(()),
        }
    }

    pub fn r_t(&self, n: u32, _q: &Z, _t: usize) -> u32 {
        match self.t_exponent {
            ExponentRule::StagePlus { offset } => n + offset,
            ExponentRule::Constant { value } => value,
        }
    }

    pub fn r_conv(&self, n: u32, q: &Z, prod_b: &Z) -> Z {
        Z::from(self.conv_scale) * (Z::one() << n as usize) * q * prod_b * Z::from(n + 1)
    }

    pub fn r_domain(&self, n: u32, _b: &[Z]) -> Z {
        Z::from(self.domain_base) + Z::from(n)
    }

    pub fn d_floor(&self, n: u32, q: &Z, b_next: &[Z]) -> Z {
        let prod: Z = b_next.iter().fold(Z::one(), |acc, x| acc * x);
        let target = self.r_conv(n, q, &prod);
        let step = q * &prod;
        let need = target - q;
        let tight = if need.is_positive() {
            (need + &step - Z::one()) / &step
        } else {
            Z::one()
        };
        tight.max(Z::from(self.d_min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_r_t_doubles_at_stage_zero() {
        let p = GrowthPolicy::default();
        assert_eq!(p.r_t(0, &Z::one(), 1), 1);
        assert_eq!(p.r_t(2, &Z::one(), 8), 3);
    }

    #[test]
    fn tight_d_reaches_r_conv() {
        let p = GrowthPolicy::default();
        let b = [Z::from(1), Z::from(2)];
        // R_conv = 1·1·1·2·1 = 2, d = 1 gives q = 3 ≥ 2.
        assert_eq!(p.d_floor(0, &Z::one(), &b), Z::from(1));
        for n in 0..5u32 {
            for q in [1i64, 3, 10, 97] {
                let q = Z::from(q);
                let d = p.d_floor(n, &q, &b);
                let qn = &q * (Z::one() + &d * 2);
                assert!(qn >= p.r_conv(n, &q, &Z::from(2)));
                if d > Z::one() {
                    let qm = &q * (Z::one() + (&d - 1) * 2);
                    assert!(qm < p.r_conv(n, &q, &Z::from(2)));
                }
            }
        }
    }

    #[test]
    fn zero_exponent_rejected() {
        let mut p = GrowthPolicy::default();
        p.t_exponent = ExponentRule::Constant { value: 0 };
        assert!(p.validate().is_err());
        p.t_exponent = ExponentRule::Constant { value: 1 };
        assert!(p.validate().is_ok());
    }
}
