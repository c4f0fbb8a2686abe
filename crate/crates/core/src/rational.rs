//! Exact rational helpers shared by every module.
//!
//! All probabilities, means and values are [`Rat`] (arbitrary precision); floats only
//! appear at the reporting boundary.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.001"` into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let t = text.trim();
    let bad = || Error::BadInput(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rat::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

/// Renders as `p/q`, or `p` when the denominator is one.
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator/denominator beyond f64 range: scale both down first
        let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
        let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Decimal rendering with a fixed number of fractional digits, rounded half away from zero.
pub fn fmt_decimal(r: &Rat, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (r * Rat::from_integer(scale.clone())).round();
    let v = scaled.to_integer();
    let neg = v.is_negative();
    let (q, m) = v.abs().div_rem(&scale);
    let frac = format!("{:0>width$}", m.to_string(), width = digits);
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{q}")
    } else {
        format!("{sign}{q}.{frac}")
    }
}

pub fn ceil_to_u64(r: &Rat) -> Option<u64> {
    r.ceil().to_integer().to_u64()
}

pub fn floor_to_i64(r: &Rat) -> Option<i64> {
    r.floor().to_integer().to_i64()
}

/// `ceil(p * 2^64)` for `p` in `[0, 1]`; a uniform `u: u64` satisfies `u / 2^64 < p`
/// exactly when `u < threshold`.
pub fn unit_threshold(p: &Rat) -> u128 {
    debug_assert!(!p.is_negative() && *p <= Rat::one());
    let scaled = p * Rat::from_integer(BigInt::from(1u128 << 64));
    let c = scaled.ceil().to_integer();
    match c.sign() {
        Sign::Minus | Sign::NoSign => 0,
        Sign::Plus => c.to_biguint().and_then(|b: BigUint| b.to_u128()).unwrap_or(u128::MAX),
    }
}

/// Largest value among `items` under exact comparison, first occurrence on ties.
pub fn argmax_first<'a, I>(items: I) -> Option<usize>
where
    I: IntoIterator<Item = &'a Rat>,
{
    let mut best: Option<(usize, &Rat)> = None;
    for (i, v) in items.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
