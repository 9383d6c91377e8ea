//! Exact rational helpers shared by the expression, model and inference layers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parses a decimal literal (`0.8`, `12`, `1e-3`, `2.5E2`) or a fraction
/// (`3/200`) into an exact rational. A leading `-` is accepted.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(idx) => (&body[..idx], body[idx + 1..].parse::<i64>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Nearest `f64` to an exact rational.
pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails on overflow.
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational representation of a finite `f64`.
pub fn from_f64(value: f64) -> Option<BigRational> {
    BigRational::from_float(value)
}

/// Rational from the shortest decimal string that round-trips `value`.
/// `0.1_f64` becomes exactly `1/10`, which is what a user typing `0.1` into a
/// JSON manifest means.
pub fn from_f64_decimal(value: f64) -> Option<BigRational> {
    if !value.is_finite() {
        return None;
    }
    parse_rational(&format!("{value}"))
}

/// Whether the rational has a finite decimal expansion (denominator of the
/// form 2^a 5^b).
pub fn is_decimal(value: &BigRational) -> bool {
    let mut den = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    while den.is_even() {
        den /= &two;
    }
    while (&den % &five).is_zero() {
        den /= &five;
    }
    den.is_one()
}

/// Exact decimal text for a rational with a finite decimal expansion;
/// `None` otherwise.
pub fn format_decimal(value: &BigRational) -> Option<String> {
    if !is_decimal(value) {
        return None;
    }
    if value.is_integer() {
        return Some(value.numer().to_string());
    }
    let negative = value.is_negative();
    let abs = value.abs();
    let mut digits = 0usize;
    let mut scaled = abs.clone();
    let ten = BigRational::from_integer(BigInt::from(10u32));
    while !scaled.is_integer() {
        scaled *= &ten;
        digits += 1;
    }
    let text = scaled.numer().to_string();
    let text = if text.len() <= digits {
        format!("{}{}", "0".repeat(digits - text.len() + 1), text)
    } else {
        text
    };
    let (int_part, frac_part) = text.split_at(text.len() - digits);
    Some(format!("{}{}.{}", if negative { "-" } else { "" }, int_part, frac_part))
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(value: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}

/// Canonical text used for fingerprints and diagnostics: decimal when
/// possible, `p/q` otherwise.
pub fn canonical_text(value: &BigRational) -> String {
    format_decimal(value).unwrap_or_else(|| format!("{}/{}", value.numer(), value.denom()))
}
