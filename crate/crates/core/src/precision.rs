//! Precision policy and small helpers around `rug` floats and complexes.

use rug::float::Constant;
use rug::{Complex, Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex value carried at a context's working precision.
pub type HpComplex = Complex;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Requested accuracy plus the policy for guard digits and escalation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionContext {
    digits: u32,
    guard_digits: u32,
    max_digits: u32,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            digits: 30,
            guard_digits: 20,
            max_digits: 2000,
        }
    }
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 16;
    pub const MIN_GUARD: u32 = 5;

    pub fn new(digits: u32) -> Result<Self> {
        Self::with_policy(digits, 20, 2000.max(digits))
    }

    pub fn with_policy(digits: u32, guard_digits: u32, max_digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::InvalidInput(format!(
                "digits must be >= {}, got {digits}",
                Self::MIN_DIGITS
            )));
        }
        if guard_digits < Self::MIN_GUARD {
            return Err(Error::InvalidInput(format!(
                "guard_digits must be >= {}, got {guard_digits}",
                Self::MIN_GUARD
            )));
        }
        if max_digits < digits {
            return Err(Error::InvalidInput(format!(
                "max_digits ({max_digits}) must be >= digits ({digits})"
            )));
        }
        Ok(Self {
            digits,
            guard_digits,
            max_digits,
        })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard_digits(&self) -> u32 {
        self.guard_digits
    }

    pub fn max_digits(&self) -> u32 {
        self.max_digits
    }

    /// digits + guard_digits.
    pub fn working_digits(&self) -> u32 {
        self.digits + self.guard_digits
    }

    /// Binary precision matching [`working_digits`](Self::working_digits).
    pub fn bits(&self) -> u32 {
        digits_to_bits(self.working_digits())
    }

    /// Same policy at a different requested digit count (clamped to `max_digits`).
    pub fn with_digits(&self, digits: u32) -> Self {
        Self {
            digits: digits.clamp(Self::MIN_DIGITS, self.max_digits),
            ..*self
        }
    }

    /// Doubled digits, or `None` once `max_digits` has been reached.
    pub fn doubled(&self) -> Option<Self> {
        if self.digits >= self.max_digits {
            None
        } else {
            Some(self.with_digits((self.digits * 2).min(self.max_digits)))
        }
    }

    /// Decimal exponent `k` of the residual tolerance `10^-k` used by the
    /// symmetry validators: `digits - guard`, but never below `digits / 2`
    /// so that low-digit contexts still demand something meaningful.
    pub fn tolerance_exponent(&self) -> i32 {
        let k = self.digits as i32 - self.guard_digits as i32;
        k.max(self.digits as i32 / 2)
    }

    pub fn residual_tolerance(&self) -> f64 {
        10f64.powi(-self.tolerance_exponent())
    }

    pub fn real(&self, v: f64) -> Float {
        Float::with_val(self.bits(), v)
    }

    pub fn complex(&self, re: f64, im: f64) -> Complex {
        Complex::with_val(self.bits(), (re, im))
    }
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + 8
}

pub fn bits_to_digits(bits: u32) -> u32 {
    (bits as f64 / LOG2_10).floor() as u32
}

pub fn pi(bits: u32) -> Float {
    Float::with_val(bits, Constant::Pi)
}

pub fn rational_to_float(q: &Rational, bits: u32) -> Float {
    Float::with_val(bits, q)
}

/// |z| as a float at `bits`.
pub fn abs(z: &Complex, bits: u32) -> Float {
    Float::with_val(bits, z.abs_ref())
}

/// log2|x| from mantissa and binary exponent; `-inf` for zero.
pub fn log2_float(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    e as f64 + m.abs().log2()
}

/// log2|z|, usable far outside the f64 exponent range.
pub fn log2_mag(z: &Complex) -> f64 {
    let a = log2_float(z.real());
    let b = log2_float(z.imag());
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + 0.5 * (1.0 + 2f64.powf(2.0 * (lo - hi))).log2()
}

/// log10|z| via the binary exponent, safe for magnitudes far outside f64 range.
pub fn log10_mag(z: &Complex) -> f64 {
    log2_mag(z) / LOG2_10
}

pub fn log10_float(x: &Float) -> f64 {
    log2_float(x) / LOG2_10
}

/// Lossy conversion used for reporting; out-of-range values saturate.
pub fn to_f64(x: &Float) -> f64 {
    x.to_f64()
}

/// Formats with `digits` significant decimal digits in scientific notation.
pub fn format_float(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits.max(1)))
}

pub fn format_complex(z: &Complex, digits: usize) -> String {
    let re = format_float(z.real(), digits);
    let im = z.imag();
    let sign = if im.is_sign_negative() { "-" } else { "+" };
    let im_abs = Float::with_val(im.prec(), im.abs_ref());
    format!("{re} {sign} {}i", format_float(&im_abs, digits))
}

/// Parses a decimal literal (`"0.1"`, `"-2.5e-3"`, `"1/3"`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::InvalidInput("empty number".into()));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d == 0 {
            return Err(Error::InvalidInput(format!("zero denominator in '{s}'")));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad exponent in '{s}'")))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::InvalidInput(format!("not a number: '{s}'")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::InvalidInput(format!("not a number: '{s}'")));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: rug::Integer = digits
        .parse()
        .map_err(|_| Error::InvalidInput(format!("not a number: '{s}'")))?;
    let scale = exponent - frac_part.len() as i32;
    let mut q = Rational::from(num);
    let pow10 = rug::Integer::from(rug::Integer::u_pow_u(10, scale.unsigned_abs()));
    if scale >= 0 {
        q *= pow10;
    } else {
        q /= pow10;
    }
    if neg {
        q = -q;
    }
    Ok(q)
}

/// Exact rational for the shortest decimal representation of `v`, so that
/// `0.1_f64` maps to `1/10` rather than its binary expansion.
pub fn rational_from_f64(v: f64) -> Result<Rational> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite value {v}")));
    }
    parse_rational(&format!("{v:e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    #[test]
    fn context_invariants() {
        assert!(PrecisionContext::new(15).is_err());
        assert!(PrecisionContext::with_policy(30, 4, 100).is_err());
        assert!(PrecisionContext::with_policy(300, 20, 100).is_err());
        let ctx = PrecisionContext::new(50).unwrap();
        assert_eq!(ctx.working_digits(), 70);
        assert!(ctx.bits() >= 232);
        assert_eq!(ctx.tolerance_exponent(), 30);
        assert_eq!(PrecisionContext::new(16).unwrap().tolerance_exponent(), 8);
    }

    #[test]
    fn doubling_stops_at_cap() {
        let ctx = PrecisionContext::with_policy(40, 20, 100).unwrap();
        let c2 = ctx.doubled().unwrap();
        assert_eq!(c2.digits(), 80);
        let c3 = c2.doubled().unwrap();
        assert_eq!(c3.digits(), 100);
        assert!(c3.doubled().is_none());
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.1").unwrap(), Rational::from((1, 10)));
        assert_eq!(parse_rational("-2.5e-3").unwrap(), Rational::from((-1, 400)));
        assert_eq!(parse_rational("1/3").unwrap(), Rational::from((1, 3)));
        assert_eq!(parse_rational("12").unwrap(), Rational::from(12));
        assert_eq!(rational_from_f64(0.2).unwrap(), Rational::from((1, 5)));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn magnitude_helpers() {
        let z = Complex::with_val(200, (3.0, 4.0));
        assert!((log10_mag(&z) - 5f64.log10()).abs() < 1e-12);
        let big = Complex::with_val(200, (Float::with_val(200, 10).pow(400u32), 0));
        assert!((log10_mag(&big) - 400.0).abs() < 1e-9);
        assert_eq!(log2_mag(&Complex::new(64)), f64::NEG_INFINITY);
    }
}
