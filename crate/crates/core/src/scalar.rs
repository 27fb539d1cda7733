//! Arithmetic backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. Two backends ship:
//! [`Rational`] (arbitrary precision, every comparison exact) and `f64`, whose
//! comparisons go through a process-wide tolerance (see [`set_float_tolerance`]).

use std::fmt::{Debug, Display};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Rational = BigRational;

/// Default absolute/relative comparison tolerance of the float backend.
pub const DEFAULT_FLOAT_TOLERANCE: f64 = 1e-9;

static FLOAT_TOLERANCE_BITS: AtomicU64 = AtomicU64::new(0x3E11_2E0B_E826_D695); // 1e-9

/// Sets the comparison tolerance used by the `f64` backend.
pub fn set_float_tolerance(tol: f64) {
    assert!(tol.is_finite() && tol >= 0.0, "tolerance must be finite and non-negative");
    FLOAT_TOLERANCE_BITS.store(tol.to_bits(), Ordering::Relaxed);
}

pub fn float_tolerance() -> f64 {
    f64::from_bits(FLOAT_TOLERANCE_BITS.load(Ordering::Relaxed))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{input}` as a number")]
pub struct ParseScalarError {
    pub input: String,
}

/// Arithmetic used by the engine.
///
/// All "is zero" / sign predicates are exact for the rational backend and
/// tolerance-based for floats.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Signed + Send + Sync + 'static
{
    /// `true` when every comparison is exact.
    const EXACT: bool;
    /// Short backend name, as used by the CLI (`exact` / `float`).
    const MODE: &'static str;

    fn from_frac(num: i64, den: i64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_frac(n, 1)
    }

    /// Converts an exact rational into this backend.
    fn from_rational(r: &Rational) -> Self;

    /// Parses `"p/q"`, an integer, or a decimal such as `"-0.125"` / `"1e-3"`.
    fn parse_value(s: &str) -> Result<Self, ParseScalarError>;

    fn to_f64(&self) -> f64;

    /// Canonical textual form: `p/q` (or `p`) for rationals, shortest decimal for floats.
    fn render(&self) -> String;

    /// Comparison tolerance; zero for exact backends.
    fn tolerance() -> f64;

    fn near_zero(&self) -> bool;

    /// Zero test relative to a magnitude `scale` (used for rank decisions).
    fn near_zero_rel(&self, scale: &Self) -> bool;

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).near_zero()
    }

    /// Strictly positive beyond tolerance.
    fn definitely_pos(&self) -> bool {
        !self.near_zero() && self.is_positive()
    }

    /// Strictly negative beyond tolerance.
    fn definitely_neg(&self) -> bool {
        !self.near_zero() && self.is_negative()
    }

    /// `self < other`, with ties inside tolerance counted as not-less.
    fn strictly_less(&self, other: &Self) -> bool {
        (other.clone() - self.clone()).definitely_pos()
    }

    /// `self <= other` up to tolerance.
    fn less_eq(&self, other: &Self) -> bool {
        !(self.clone() - other.clone()).definitely_pos()
    }
}

fn parse_rational(s: &str) -> Result<Rational, ParseScalarError> {
    let err = || ParseScalarError { input: s.to_string() };
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = t[i + 1..].parse().map_err(|_| err())?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let joined = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| err())?;
    if neg {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(err());
    }
    let ten = BigInt::from(10u32);
    let r = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const MODE: &'static str = "exact";

    fn from_frac(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn parse_value(s: &str) -> Result<Self, ParseScalarError> {
        parse_rational(s)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn tolerance() -> f64 {
        0.0
    }

    fn near_zero(&self) -> bool {
        self.is_zero()
    }

    fn near_zero_rel(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float";

    fn from_frac(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn parse_value(s: &str) -> Result<Self, ParseScalarError> {
        let t = s.trim();
        if t.contains('/') {
            return parse_rational(t).map(|r| Self::from_rational(&r));
        }
        t.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ParseScalarError { input: s.to_string() })
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn render(&self) -> String {
        // Normalise negative zero so reports stay byte-stable.
        let v = if *self == 0.0 { 0.0 } else { *self };
        format!("{v:?}")
    }

    fn tolerance() -> f64 {
        float_tolerance()
    }

    fn near_zero(&self) -> bool {
        self.abs() <= float_tolerance()
    }

    fn near_zero_rel(&self, scale: &Self) -> bool {
        self.abs() <= float_tolerance() * scale.abs().max(1.0)
    }

    /// Absolute below magnitude 1, relative above.
    fn approx_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= float_tolerance() * self.abs().max(other.abs()).max(1.0)
    }
}

/// Sum of a sequence of scalars (`0` when empty).
pub fn sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items.into_iter().fold(S::zero(), |acc, x| acc + x)
}

/// Dot product of two equal-length slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Smallest element by `PartialOrd`; `None` on empty input.
pub fn min_of<S: Scalar>(items: impl IntoIterator<Item = S>) -> Option<S> {
    items
        .into_iter()
        .fold(None, |m: Option<S>, x| match m {
            Some(m) if m <= x => Some(m),
            _ => Some(x),
        })
}

pub fn max_of<S: Scalar>(items: impl IntoIterator<Item = S>) -> Option<S> {
    items
        .into_iter()
        .fold(None, |m: Option<S>, x| match m {
            Some(m) if m >= x => Some(m),
            _ => Some(x),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    #[test]
    fn default_tolerance_bits_decode_to_1e9() {
        assert_eq!(f64::from_bits(0x3E11_2E0B_E826_D695), DEFAULT_FLOAT_TOLERANCE);
    }

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(Rational::parse_value("3/4").unwrap(), q(3, 4));
        assert_eq!(Rational::parse_value("0.1").unwrap(), q(1, 10));
        assert_eq!(Rational::parse_value("-0.02").unwrap(), q(-1, 50));
        assert_eq!(Rational::parse_value("12").unwrap(), q(12, 1));
        assert_eq!(Rational::parse_value("1.5e-2").unwrap(), q(3, 200));
        assert_eq!(Rational::parse_value(".5").unwrap(), q(1, 2));
        assert!(Rational::parse_value("1/0").is_err());
        assert!(Rational::parse_value("abc").is_err());
        assert!(Rational::parse_value("").is_err());
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(q(2, 4).render(), "1/2");
        assert_eq!(q(-8, 4).render(), "-2");
        assert_eq!((-0.0f64).render(), "0.0");
        assert_eq!(0.25f64.render(), "0.25");
    }

    #[test]
    fn float_parse_accepts_fractions() {
        assert_eq!(f64::parse_value("1/4").unwrap(), 0.25);
        assert!(f64::parse_value("nan").is_err());
    }

    #[test]
    fn float_comparisons_use_tolerance() {
        assert!(1e-12f64.near_zero());
        assert!(!1e-6f64.near_zero());
        assert!(!1e-12f64.definitely_pos());
        assert!(0.3f64.approx_eq(&(0.1 + 0.2)));
        assert!(1.0f64.less_eq(&(1.0 - 1e-12)));
    }

    #[test]
    fn exact_comparisons_are_exact() {
        let tiny = q(1, 1_000_000_000_000);
        assert!(!tiny.near_zero());
        assert!(tiny.definitely_pos());
        assert!(q(1, 3).strictly_less(&q(1, 2)));
    }

    #[test]
    fn min_max_helpers() {
        let xs = vec![q(3, 2), q(-1, 2), q(1, 1)];
        assert_eq!(min_of(xs.clone()), Some(q(-1, 2)));
        assert_eq!(max_of(xs), Some(q(3, 2)));
        assert_eq!(min_of(Vec::<Rational>::new()), None);
    }
}
