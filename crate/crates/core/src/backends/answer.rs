//! Canonical rendering and lenient parsing of numeric answers.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// An exact answer, rendered as a bare integer when integral and as a
/// reduced fraction `a/b` (b > 0) otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArithAnswer(pub BigRational);

impl fmt::Display for ArithAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // BigRational keeps itself reduced with a positive denominator.
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// Parses an answer string as an integer, a fraction `a/b`, or a decimal.
/// Surrounding whitespace and one trailing period are ignored.
pub fn parse_numeric_answer(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let s = match s.strip_suffix('.') {
        Some(rest) if rest.ends_with(|c: char| c.is_ascii_digit()) => rest,
        _ => s,
    };
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_decimal(num.trim())?;
        let den = parse_decimal(den.trim())?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if body.contains('.') && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = num_traits::pow(BigInt::from(10u8), frac_part.len());
    let mut v = BigRational::new(
        numer,
        if denom.is_zero() {
            BigInt::one()
        } else {
            denom
        },
    );
    if negative {
        v = -v;
    }
    Some(v)
}
