//! CSV formatting: 17 significant digits in scientific notation.

use std::fmt::Write as _;
use std::f64::consts::LN_10;

/// `x` with 17 significant digits; `nan`, `inf`, `-inf` otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// e^{ln_x} in the format of [`num`], also when e^{ln_x} overflows f64.
///
/// Beyond the f64 range the mantissa comes from the fractional part of
/// ln_x / ln 10, so its last digits carry the rounding of ln_x.
pub fn num_from_ln(ln_x: f64) -> String {
    if ln_x.is_nan() {
        return "nan".into();
    }
    let direct = ln_x.exp();
    if direct.is_finite() && direct > f64::MIN_POSITIVE {
        return num(direct);
    }
    if ln_x == f64::NEG_INFINITY {
        return num(0.0);
    }
    if ln_x == f64::INFINITY {
        return "inf".into();
    }
    let l10 = ln_x / LN_10;
    let mut e = l10.floor();
    let mut m = 10f64.powf(l10 - e);
    if format!("{m:.16}").starts_with("10") {
        m /= 10.0;
        e += 1.0;
    }
    format!("{m:.16}e{}", e as i64)
}

/// CSV text from a header and rows of preformatted cells.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{}", c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(2.0 / 3.0), "6.6666666666666663e-1");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn overflowing_values_from_logs() {
        assert_eq!(num_from_ln(2f64.ln()), num(2.0));
        // 1000 ln 10 itself is rounded, to about 3e-13 relative in the result.
        let s = num_from_ln(1000.0 * LN_10);
        assert!(s.starts_with("1.00000000000") || s.starts_with("9.99999999999"), "{s}");
        assert!(s.ends_with("e1000") || s.ends_with("e999"), "{s}");
        let s = num_from_ln(800.0);
        // e^800 = 2.7263745721125665e347
        assert!(s.starts_with("2.72637457211") && s.ends_with("e347"), "{s}");
        let s = num_from_ln(-800.0);
        assert!(s.starts_with("3.6678") && s.ends_with("e-348"), "{s}");
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1", "2"]);
        assert_eq!(c.into_string(), "a,b\n1,2\n");
    }
}
