//! Parsing and formatting of exact rationals.
//!
//! Accepted input forms: `p/q` (integers, q > 0 after sign normalization),
//! plain integers, and decimal literals such as `0.25` or `-1.5`, which are
//! parsed exactly as scaled integers (no float round trip).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Parse a rational from `p/q`, integer, or decimal text.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let sign = if whole.trim_start().starts_with('-') { -1 } else { 1 };
        let whole_digits = whole.trim();
        let w: BigInt = if whole_digits == "-" || whole_digits == "+" || whole_digits.is_empty() {
            BigInt::zero()
        } else {
            whole_digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer part in {s:?}")))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad fractional part in {s:?}")));
        }
        if frac.len() > 64 {
            return Err(Error::Parse(format!(
                "fractional part of {s:?} is longer than 64 digits"
            )));
        }
        let f: BigInt = frac
            .parse()
            .map_err(|_| Error::Parse(format!("bad fractional part in {s:?}")))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let magnitude = w.abs() * &scale + f;
        return Ok(BigRational::new(BigInt::from(sign) * magnitude, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational literal {s:?}")))?;
    Ok(BigRational::from_integer(n))
}

/// Canonical `p/q` text (plain integer when the denominator is 1).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// serde `serialize_with` helper: emit a rational as its canonical `p/q`
/// string.
pub fn serde_rat<S: serde::Serializer>(
    r: &BigRational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

/// Nearest-ish f64 for reporting. Conversion goes through the big integer
/// parts, so very large numerators/denominators degrade gracefully to
/// infinities rather than panicking.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}
