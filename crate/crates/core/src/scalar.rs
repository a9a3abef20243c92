//! Numeric abstraction used by the Markov-chain layer.
//!
//! Programs always describe probabilities exactly. Once a chain is built the
//! transition weights can be carried in any [`Scalar`]: exact rationals for
//! verdicts, or floats for quick inspection of large chains.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Field element usable as a transition weight.
pub trait Scalar: Num + Neg<Output = Self> + Clone + Debug + PartialEq + PartialOrd + Send + Sync + 'static {
    /// Converts an exact rational into this scalar type.
    fn from_rational(value: &BigRational) -> Self;

    /// Best-effort conversion for reporting and pivot selection.
    fn to_f64(&self) -> f64;

    /// Whether arithmetic in this type is exact.
    fn is_exact() -> bool;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for BigRational {
    fn from_rational(value: &BigRational) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Scalar for f64 {
    fn from_rational(value: &BigRational) -> Self {
        ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Scalar for f32 {
    fn from_rational(value: &BigRational) -> Self {
        ToPrimitive::to_f32(value).unwrap_or(f32::NAN)
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn is_exact() -> bool {
        false
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

/// `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders a rational as a terminating decimal when one exists
/// (the denominator has no prime factors other than 2 and 5).
pub fn to_decimal_string(value: &BigRational) -> Option<String> {
    if value.is_integer() {
        return Some(value.numer().to_string());
    }
    let mut den = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let digits = twos.max(fives);
    let scaled = value * BigRational::from_integer(BigInt::from(10).pow(digits));
    debug_assert!(scaled.is_integer());
    let int = scaled.to_integer();
    let negative = int.is_negative();
    let mut text = int.abs().to_string();
    let width = digits as usize + 1;
    if text.len() < width {
        text = format!("{}{}", "0".repeat(width - text.len()), text);
    }
    let split = text.len() - digits as usize;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&text[..split]);
    out.push('.');
    out.push_str(&text[split..]);
    Some(out)
}

/// Renders a rational as `0.25`, `3`, or `1/3`.
pub fn format_rational(value: &BigRational) -> String {
    to_decimal_string(value).unwrap_or_else(|| format!("{}/{}", value.numer(), value.denom()))
}

/// Parses a decimal literal such as `0.3` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = BigInt::from(10).pow(frac_part.len() as u32);
    Some(BigRational::new(numer, denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let tenth = parse_decimal("0.1").unwrap();
        assert_eq!(tenth * BigRational::from_integer(10.into()), BigRational::one());
        assert_eq!(parse_decimal("0.3").unwrap(), ratio(3, 10));
        assert_eq!(parse_decimal("1").unwrap(), ratio(1, 1));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("1.2.3"), None);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_rational(&ratio(1, 2)), "0.5");
        assert_eq!(format_rational(&ratio(3, 40)), "0.075");
        assert_eq!(format_rational(&ratio(1, 3)), "1/3");
        assert_eq!(format_rational(&ratio(7, 1)), "7");
        assert_eq!(format_rational(&ratio(-1, 4)), "-0.25");
        assert_eq!(format_rational(&ratio(1, 100)), "0.01");
    }

    #[test]
    fn float_conversion() {
        assert_eq!(<f64 as Scalar>::from_rational(&ratio(3, 4)), 0.75);
        assert_eq!(<f32 as Scalar>::from_rational(&ratio(1, 4)), 0.25);
        assert!(BigRational::is_exact());
        assert!(!f64::is_exact());
    }
}
