//! Exact rational helpers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Exact dyadic value of a finite double.
pub fn from_f64(v: f64) -> Result<Q> {
    Q::from_float(v).ok_or_else(|| Error::Parse(format!("non-finite number {v}")))
}

pub fn floor_i128(v: &Q) -> Option<i128> {
    v.floor().to_integer().to_i128()
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Parses `a/b`, plain integers, decimals and scientific notation exactly.
pub fn parse(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| bad())?;
        let d: BigInt = b.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int}{frac}");
    let n: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut v = Q::from_integer(n);
    if shift >= 0 {
        v *= Q::from_integer(num_traits::pow(ten, shift as usize));
    } else {
        v /= Q::from_integer(num_traits::pow(ten, (-shift) as usize));
    }
    Ok(if neg { -v } else { v })
}

pub fn format(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Values rescaled to integers over one common denominator, for fast exact
/// cut arithmetic. `None` when the numbers do not fit in `i128`.
#[derive(Clone, Debug)]
pub struct Scaled {
    pub num: Vec<i128>,
    pub den: i128,
}

impl Scaled {
    pub fn new(values: &[Q]) -> Option<Scaled> {
        let mut den = BigInt::one();
        for v in values {
            den = den.lcm(v.denom());
        }
        // Headroom so that sums over a few hundred edges cannot overflow.
        let limit = BigInt::from(1i128 << 100);
        if den > limit {
            return None;
        }
        let mut num = Vec::with_capacity(values.len());
        for v in values {
            let n = v.numer() * (&den / v.denom());
            if n.abs() > limit {
                return None;
            }
            num.push(n.to_i128()?);
        }
        Some(Scaled { num, den: den.to_i128()? })
    }

    /// `value * den` for a rational threshold, exactly (`None` if inexact).
    pub fn scale(&self, v: &Q) -> Option<i128> {
        let t = v * Q::from_integer(BigInt::from(self.den));
        if t.denom().is_one() {
            t.numer().to_i128()
        } else {
            None
        }
    }

    /// The rational `n / den`.
    pub fn unscale(&self, n: i128) -> Q {
        Q::new(BigInt::from(n), BigInt::from(self.den))
    }
}

/// `a < b·den` style comparisons need a rational threshold on integers; this
/// returns `(p, r)` with `threshold = p / r`, `r > 0`.
pub fn as_fraction(v: &Q) -> Option<(i128, i128)> {
    Some((v.numer().to_i128()?, v.denom().to_i128()?))
}


/// Serde adapter writing rationals as `"n/d"` strings.
pub mod qser {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// A JSON number or numeric string as an exact rational.
pub fn from_json(v: &serde_json::Value) -> Result<Q> {
    match v {
        serde_json::Value::String(s) => parse(s),
        serde_json::Value::Number(n) => parse(&n.to_string()),
        other => Err(Error::Parse(format!("expected a number, found {other}"))),
    }
}
