use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Z = BigInt;
pub type Q = BigRational;

/// `n/d` as an exact rational. Panics when `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(Z::from(n), Z::from(d))
}

/// Integer as a rational.
pub fn qz(n: &Z) -> Q {
    Q::from_integer(n.clone())
}

pub fn floor_q(x: &Q) -> Z {
    x.numer().div_floor(x.denom())
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: &Q) -> Q {
    x - qz(&floor_q(x))
}

/// Distance on `R/Z`.
pub fn torus_dist(x: &Q, y: &Q) -> Q {
    let d = frac(&(x - y));
    let e = Q::one() - &d;
    if d < e {
        d
    } else {
        e
    }
}

pub fn to_f64(x: &Q) -> f64 {
    if let Some(v) = x.to_f64() {
        return v;
    }
    // Very large numerators/denominators: scale down before converting.
    let n = x.numer();
    let d = x.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift = (nb.max(db) - 900).max(0) as u64;
    let nv = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    let dv = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
    let v = if dv == 0.0 { f64::INFINITY } else { nv / dv };
    if n.is_negative() {
        -v
    } else {
        v
    }
}

/// Canonical text form: `"a"` for integers, `"a/b"` otherwise.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse rational from {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"a"`, `"a/b"` or a finite decimal such as `"0.125"`.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = Z::from_str(n.trim()).map_err(|_| err())?;
        let d = Z::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        if fp.is_empty() || !fp.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let neg = ip.starts_with('-');
        let ip = if ip.is_empty() || ip == "-" { "0" } else { ip };
        let ipv = Z::from_str(ip).map_err(|_| err())?;
        let fpv = Z::from_str(fp).map_err(|_| err())?;
        let scale = num_traits::pow(Z::from(10), fp.len());
        let mag = ipv.abs() * &scale + fpv;
        let n = if neg { -mag } else { mag };
        return Ok(Q::new(n, scale));
    }
    Z::from_str(s).map(Q::from_integer).map_err(|_| err())
}

/// Serde adapters writing big integers and rationals as strings, so JSON
/// consumers never see a truncated 64-bit number.
pub mod serde_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub mod int {
        use super::*;
        pub fn serialize<S: Serializer>(v: &Z, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&v.to_string())
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Z, D::Error> {
            let s = String::deserialize(d)?;
            Z::from_str(&s).map_err(D::Error::custom)
        }
    }

    pub mod int_vec {
        use super::*;
        use serde::ser::SerializeSeq;
        pub fn serialize<S: Serializer>(v: &[Z], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Z>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| Z::from_str(s).map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod rat {
        use super::*;
        pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&fmt_q(v))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
            let s = String::deserialize(d)?;
            parse_q(&s).map_err(D::Error::custom)
        }
    }

    pub mod rat_vec {
        use super::*;
        use serde::ser::SerializeSeq;
        pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&fmt_q(x))?;
            }
            seq.end()
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_q(s).map_err(D::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frac_and_floor_of_negative() {
        assert_eq!(floor_q(&q(-7, 3)), Z::from(-3));
        assert_eq!(frac(&q(-7, 3)), q(2, 3));
        assert_eq!(frac(&q(5, 5)), q(0, 1));
    }

    #[test]
    fn circle_distance() {
        assert_eq!(torus_dist(&q(1, 10), &q(9, 10)), q(1, 5));
        assert_eq!(torus_dist(&q(0, 1), &q(1, 2)), q(1, 2));
        assert_eq!(torus_dist(&q(3, 2), &q(1, 2)), q(0, 1));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-4").unwrap(), q(-4, 1));
        assert_eq!(parse_q("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn huge_to_f64() {
        let big = Z::from(3) << 2000usize;
        let x = Q::new(big.clone(), big * Z::from(4));
        assert!((to_f64(&x) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn fmt_parse_roundtrip(n in -10_000i64..10_000, d in 1i64..10_000) {
            let x = q(n, d);
            prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
        }

        #[test]
        fn frac_in_unit_interval(n in -10_000i64..10_000, d in 1i64..500) {
            let f = frac(&q(n, d));
            prop_assert!(f >= Q::zero() && f < Q::one());
            prop_assert!(torus_dist(&f, &q(n, d)).is_zero());
        }
    }
}
