//! Exact rational τ-locations.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::LawError;

pub type Rational = BigRational;

/// Parses `"p/q"`, an integer `"n"`, or a terminating decimal `"0.25"`.
pub fn parse_rational(text: &str) -> Result<Rational, LawError> {
    let malformed = || LawError::MalformedRational(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(malformed());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| malformed())?;
        let d: BigInt = den.trim().parse().map_err(|_| malformed())?;
        if d.is_zero() {
            return Err(malformed());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let digits = format!("{}{}", int_digits, frac_part);
        let mut n: BigInt = digits.parse().map_err(|_| malformed())?;
        if negative {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10u8), frac_part.len());
        return Ok(Rational::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| malformed())?;
    Ok(Rational::from_integer(n))
}

/// Canonical text form: `"n"` for integers, `"n/d"` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite double (every double is a dyadic rational).
pub fn from_f64_exact(v: f64) -> Rational {
    Rational::from_float(v).expect("finite value")
}

/// Greatest common divisor of two non-negative rationals: the largest `g`
/// such that both are integer multiples of `g`. `gcd(0, r) = r`.
pub fn rational_gcd(a: &Rational, b: &Rational) -> Rational {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    let den = a.denom().lcm(b.denom());
    let an = a.numer() * (&den / a.denom());
    let bn = b.numer() * (&den / b.denom());
    Rational::new(an.gcd(&bn), den)
}

/// `r / delta` when it is a non-negative integer.
pub fn lattice_index(r: &Rational, delta: &Rational) -> Option<u64> {
    if delta.is_zero() {
        return None;
    }
    let q = r / delta;
    if q.is_integer() && !q.is_negative() {
        q.to_integer().to_u64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("3/2").unwrap(), r(3, 2));
        assert_eq!(parse_rational(" 4 ").unwrap(), r(4, 1));
        assert_eq!(parse_rational("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), r(-3, 2));
        assert_eq!(parse_rational("6/4").unwrap(), r(3, 2));
        for bad in ["", "1/0", "a/2", "1.", "1.2.3", "1e3", "0x10", "1/2/3"] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_rational(&r(6, 4)), "3/2");
        assert_eq!(format_rational(&r(4, 2)), "2");
    }

    #[test]
    fn gcd_of_rationals() {
        assert_eq!(rational_gcd(&r(1, 2), &r(3, 2)), r(1, 2));
        assert_eq!(rational_gcd(&r(2, 1), &r(4, 1)), r(2, 1));
        assert_eq!(rational_gcd(&r(2, 3), &r(1, 2)), r(1, 6));
        assert_eq!(rational_gcd(&r(0, 1), &r(5, 7)), r(5, 7));
    }

    #[test]
    fn lattice_index_requires_integer_multiple() {
        assert_eq!(lattice_index(&r(3, 2), &r(1, 2)), Some(3));
        assert_eq!(lattice_index(&r(3, 2), &r(1, 1)), None);
    }
}
