//! Numeric backends for tree functions.
//!
//! Every construction in the crate is generic over [`Scalar`], which is
//! implemented for [`Exact`] (arbitrary-precision rationals) and `f64`.
//! Exact inequalities are decided with zero tolerance; the float backend
//! uses a small relative slack so that rounding does not flip a certified
//! bound.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Exact = BigRational;

/// Relative slack used by the float backend in certified comparisons.
pub const FLOAT_SLACK: f64 = 1e-9;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + for<'a> AddAssign<&'a Self>
    + 'static
{
    /// `true` when comparisons are decided without tolerance.
    const EXACT: bool;

    fn from_rational(r: &BigRational) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn powi(&self, n: u32) -> Self;

    /// `|self|^p` for a finite exponent. Exact scalars only support integer `p`.
    fn abs_pow(&self, p: Exponent) -> Result<Self>;

    /// `self ≤ other`, with [`FLOAT_SLACK`] relative tolerance in float mode.
    fn certified_le(&self, other: &Self) -> bool;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn powi(&self, n: u32) -> Self {
        num_traits::pow(self.clone(), n as usize)
    }

    fn abs_pow(&self, p: Exponent) -> Result<Self> {
        let n = p.as_integer().ok_or(Error::NonIntegerExponent(p.value()))?;
        Ok(Scalar::abs(self).powi(n))
    }

    fn certified_le(&self, other: &Self) -> bool {
        self <= other
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn powi(&self, n: u32) -> Self {
        f64::powi(*self, n as i32)
    }

    fn abs_pow(&self, p: Exponent) -> Result<Self> {
        if p.is_infinite() {
            return Err(Error::InvalidExponent(p.value()));
        }
        Ok(match p.as_integer() {
            Some(n) => f64::abs(*self).powi(n as i32),
            None => f64::abs(*self).powf(p.value()),
        })
    }

    fn certified_le(&self, other: &Self) -> bool {
        *self <= *other + FLOAT_SLACK * (f64::abs(*other) + f64::abs(*self)) + f64::MIN_POSITIVE
    }
}

/// Lossy conversion that survives numerators and denominators beyond `f64` range.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let shift = r.numer().bits().max(r.denom().bits()) as i64 - 900;
    let (n, d) = if shift > 0 {
        (r.numer() >> shift as usize, r.denom() >> shift as usize)
    } else {
        (r.numer().clone(), r.denom().clone())
    };
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

/// Best rational not exceeding `x`, with denominator `2^40`.
pub fn rational_below(x: f64) -> BigRational {
    let den = BigInt::from(1u64 << 40);
    let num = BigInt::from((x * (1u64 << 40) as f64).floor() as i128);
    BigRational::new(num, den)
}

/// A Lebesgue exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn as_integer(self) -> Option<u32> {
        if self.0.is_finite() && self.0.fract() == 0.0 && self.0 <= u32::MAX as f64 {
            Some(self.0 as u32)
        } else {
            None
        }
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Exponent {
        if self.0 == 1.0 {
            Exponent::INFINITY
        } else if self.is_infinite() {
            Exponent::ONE
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
            other => {
                let v = parse_rational(other)
                    .map(|r| rational_to_f64(&r))
                    .ok_or_else(|| Error::InvalidParameter(format!("exponent {other:?}")))?;
                Exponent::new(v)
            }
        }
    }
}

/// Parses `"3"`, `"-1/4"` or a finite decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let mut n: BigInt = digits.parse().ok()?;
        if neg {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Some(BigRational::new(n, d));
    }
    s.parse::<BigInt>().ok().map(BigRational::from_integer)
}

/// `"num/den"` rendering used in reports (`"num"` for integers).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter writing exact rationals as `"num/den"` strings.
pub mod rational_string {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/4"), Some(<Exact as Scalar>::from_ratio(1, 4)));
        assert_eq!(parse_rational("0.25"), Some(<Exact as Scalar>::from_ratio(1, 4)));
        assert_eq!(parse_rational("-3"), Some(<Exact as Scalar>::from_i64(-3)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(format_rational(&<Exact as Scalar>::from_ratio(6, 8)), "3/4");
    }

    #[test]
    fn exponent_rules() {
        assert!(Exponent::new(0.5).is_err());
        assert_eq!(Exponent::TWO.conjugate(), Exponent::TWO);
        assert_eq!(Exponent::ONE.conjugate(), Exponent::INFINITY);
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::INFINITY);
        assert_eq!("3/2".parse::<Exponent>().unwrap().value(), 1.5);
        let x = <Exact as Scalar>::from_ratio(-2, 3);
        assert!(x.abs_pow(Exponent::new(1.5).unwrap()).is_err());
        assert_eq!(x.abs_pow(Exponent::TWO).unwrap(), <Exact as Scalar>::from_ratio(4, 9));
    }

    #[test]
    fn huge_rationals_convert() {
        let big = num_traits::pow(BigInt::from(10), 400);
        let r = BigRational::new(big.clone() * 3, big);
        assert!((rational_to_f64(&r) - 3.0).abs() < 1e-12);
    }
}
