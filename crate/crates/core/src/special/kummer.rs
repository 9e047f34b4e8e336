//! Confluent hypergeometric functions F = ₁F₁(a; b; η) and U(a, b, η).
//!
//! F is summed directly from its Taylor series. The sum is entire in η, so
//! no branch bookkeeping is involved, but for large |η| with Re η < 0 the
//! partial sums grow far beyond the result: the loss is measured from the
//! largest partial sum and the series is redone with that many extra digits.
//!
//! U is assembled from two F's by the connection formula on the principal
//! sheet and carried to other sheets with the monodromy relation
//!
//! ```text
//! U(a, b, η e^{2πim}) = e^{-2πibm} U(a, b, η) + (1 - e^{-2πibm}) Γ(1-b)/Γ(a-b+1) F(a, b, η)
//! ```
//!
//! When b sits within 10^-(D/2) of an integer (D working digits) the
//! connection formula is singular; U is then replaced by the average of its
//! values at b = m ± 10^-(D/2), a limit surrogate whose error is O(10^-D)
//! since U is analytic in b.

use rug::{Complex, Float};

use super::gamma::{gamma_bits, recip_gamma_bits};
use crate::error::{Error, Result};
use crate::precision::{digits_to_bits, log2_mag, pi, PrecisionContext};

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Arguments of F or U together with the sheet of η.
#[derive(Clone, Debug, PartialEq)]
pub struct KummerParams {
    pub a: Complex,
    pub b: Complex,
    pub eta: Complex,
    /// Number of completed 2π turns of the continuous arg η relative to the
    /// principal value in (-π, π].
    pub eta_winding: i64,
}

impl KummerParams {
    pub fn new(a: Complex, b: Complex, eta: Complex) -> Self {
        Self {
            a,
            b,
            eta,
            eta_winding: 0,
        }
    }

    pub fn on_sheet(mut self, winding: i64) -> Self {
        self.eta_winding = winding;
        self
    }
}

/// Digit budget for one evaluation: accuracy target plus the escalation cap.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Budget {
    pub digits: u32,
    pub guard: u32,
    pub max_digits: u32,
}

impl Budget {
    pub fn from_ctx(ctx: &PrecisionContext) -> Self {
        Self {
            digits: ctx.working_digits(),
            guard: ctx.guard_digits(),
            max_digits: ctx.max_digits() + ctx.guard_digits(),
        }
    }

    /// `None` if a pass at `used` digits that lost `lost` digits still meets
    /// the target (working digits minus guard); otherwise the digit count
    /// for the next attempt.
    fn next_digits(&self, used: u32, lost: f64) -> Option<u32> {
        if used as f64 - lost >= (self.digits - self.guard) as f64 {
            return None;
        }
        Some((self.digits + lost.ceil() as u32 + 2).max(used + self.guard))
    }
}

/// (z)_n = z (z+1) ... (z+n-1), with (z)_0 = 1.
pub fn pochhammer(z: &Complex, n: u32, ctx: &PrecisionContext) -> Complex {
    let bits = ctx.bits();
    let mut acc = Complex::with_val(bits, 1);
    let mut w = Complex::with_val(bits, z);
    for _ in 0..n {
        acc *= &w;
        w += 1u32;
    }
    acc
}

/// F(a, b, η) = Σ (a)_r / ((b)_r r!) η^r. `eta_winding` is ignored.
pub fn kummer_f(p: &KummerParams, ctx: &PrecisionContext) -> Result<Complex> {
    let f = f_escalating(&p.a, &p.b, &p.eta, Budget::from_ctx(ctx))?;
    Ok(Complex::with_val(ctx.bits(), f))
}

/// U(a, b, η) on the sheet selected by `eta_winding`.
pub fn kummer_u(p: &KummerParams, ctx: &PrecisionContext) -> Result<Complex> {
    let u = u_escalating(&p.a, &p.b, &p.eta, p.eta_winding, Budget::from_ctx(ctx))?;
    Ok(Complex::with_val(ctx.bits(), u))
}

pub(crate) fn f_escalating(a: &Complex, b: &Complex, z: &Complex, budget: Budget) -> Result<Complex> {
    check_b(b, budget.digits)?;
    let mut digits = budget.digits;
    loop {
        let bits = digits_to_bits(digits);
        let (sum, lost) = f_series(a, b, z, bits)?;
        match budget.next_digits(digits, lost) {
            None => return Ok(sum),
            Some(next) if next <= budget.max_digits => digits = next,
            Some(next) => {
                return Err(Error::precision(format!(
                    "F series lost {lost:.0} digits to cancellation; needs {next} digits, cap is {}",
                    budget.max_digits
                )))
            }
        }
    }
}

fn check_b(b: &Complex, digits: u32) -> Result<()> {
    if *b.real() <= 0.5 {
        let m = b.real().to_f64().round();
        let mut d = Complex::with_val(b.prec().0, b);
        *d.mut_real() -= m;
        if log2_mag(&d) < -(digits as f64) * LOG2_10 * 0.5 {
            return Err(Error::DegenerateParameter(format!(
                "b = {} is a non-positive integer",
                Complex::with_val(64, b)
            )));
        }
    }
    Ok(())
}

/// Raw Taylor sum at `bits`; returns the sum and the decimal digits lost
/// between the largest partial sum and the final value.
fn f_series(a: &Complex, b: &Complex, z: &Complex, bits: u32) -> Result<(Complex, f64)> {
    let mut term = Complex::with_val(bits, 1);
    let mut sum = Complex::with_val(bits, 1);
    let mut ap = Complex::with_val(bits, a);
    let mut bp = Complex::with_val(bits, b);
    let zz = Complex::with_val(bits, z);
    let mut max_log2 = 0f64;
    let mut quiet = 0u32;
    let cutoff = bits as f64 + 4.0;
    let cap = 50_000 + 8 * bits as u64;
    let mut r = 0u64;
    while quiet < 10 {
        term *= &ap;
        term *= &zz;
        term /= &bp;
        r += 1;
        term /= r;
        sum += &term;
        ap += 1u32;
        bp += 1u32;
        let ls = log2_mag(&sum);
        if ls > max_log2 {
            max_log2 = ls;
        }
        if log2_mag(&term) < max_log2 - cutoff {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if r > cap {
            return Err(Error::precision(format!("F series did not converge in {cap} terms")));
        }
    }
    let lost = (max_log2 - log2_mag(&sum)) / LOG2_10;
    Ok((sum, lost.max(0.0)))
}

/// Integer m with |b - m| < 10^-(digits/2), if any.
fn near_integer(b: &Complex, digits: u32) -> Option<i64> {
    let m = b.real().to_f64().round();
    if !m.is_finite() {
        return None;
    }
    let mut d = Complex::with_val(b.prec().0.max(64), b);
    *d.mut_real() -= m;
    if log2_mag(&d) < -(digits as f64) * 0.5 * LOG2_10 {
        Some(m as i64)
    } else {
        None
    }
}

pub(crate) fn u_escalating(
    a: &Complex,
    b: &Complex,
    z: &Complex,
    winding: i64,
    budget: Budget,
) -> Result<Complex> {
    if z.is_zero() {
        return Err(Error::DegenerateParameter("U is singular at eta = 0".into()));
    }
    if let Some(m) = near_integer(b, budget.digits) {
        // two poles of order one may cancel against each other
        let extra = budget.digits + budget.guard;
        let inner = Budget {
            digits: budget.digits + extra,
            guard: budget.guard,
            max_digits: budget.max_digits + extra,
        };
        let bits = digits_to_bits(inner.digits);
        let delta = Float::with_val(bits, Float::u_pow_u(10, budget.digits / 2 + 1)).recip();
        let lo = Complex::with_val(bits, (Float::with_val(bits, m) - &delta, 0));
        let hi = Complex::with_val(bits, (Float::with_val(bits, m) + &delta, 0));
        let ul = u_regular(a, &lo, z, winding, inner)?;
        let uh = u_regular(a, &hi, z, winding, inner)?;
        let mut avg = Complex::with_val(bits, &ul + &uh);
        avg /= 2u32;
        return Ok(Complex::with_val(digits_to_bits(budget.digits), avg));
    }
    u_regular(a, b, z, winding, budget)
}

/// Connection formula plus monodromy, with escalation on cancellation.
fn u_regular(a: &Complex, b: &Complex, z: &Complex, winding: i64, budget: Budget) -> Result<Complex> {
    let mut digits = budget.digits;
    loop {
        let bits = digits_to_bits(digits);
        let (u, lost) = u_connection(a, b, z, winding, bits, budget)?;
        match budget.next_digits(digits, lost) {
            None => return Ok(Complex::with_val(digits_to_bits(budget.digits), u)),
            Some(next) if next <= budget.max_digits => digits = next,
            Some(next) => {
                return Err(Error::precision(format!(
                    "U connection formula lost {lost:.0} digits; needs {next} digits, cap is {}",
                    budget.max_digits
                )))
            }
        }
    }
}

fn u_connection(
    a: &Complex,
    b: &Complex,
    z: &Complex,
    winding: i64,
    bits: u32,
    budget: Budget,
) -> Result<(Complex, f64)> {
    let inner = Budget {
        digits: crate::precision::bits_to_digits(bits),
        ..budget
    };
    let pole_digits = inner.digits;
    let one = Complex::with_val(bits, 1);
    // Γ(1-b)/Γ(a-b+1) F(a, b, z)
    let one_minus_b = Complex::with_val(bits, &one - b);
    let g1 = gamma_bits(&one_minus_b, bits, pole_digits)?;
    let mut amb1 = Complex::with_val(bits, a - b);
    amb1 += 1u32;
    let r1 = recip_gamma_bits(&amb1, bits);
    let f1 = f_escalating(a, b, z, inner)?;
    let mut t1 = Complex::with_val(bits, &g1 * &r1);
    t1 *= &f1;

    // Γ(b-1)/Γ(a) z^{1-b} F(a-b+1, 2-b, z)
    let bm1 = Complex::with_val(bits, b - &one);
    let g2 = gamma_bits(&bm1, bits, pole_digits)?;
    let r2 = recip_gamma_bits(a, bits);
    let mut t2 = Complex::with_val(bits, &g2 * &r2);
    if !t2.is_zero() {
        let two_minus_b = Complex::with_val(bits, 2u32 - Complex::with_val(bits, b));
        let f2 = f_escalating(&amb1, &two_minus_b, z, inner)?;
        let ln_z = Complex::with_val(bits, z.ln_ref());
        let pw = Complex::with_val(bits, &one_minus_b * &ln_z).exp();
        t2 *= &pw;
        t2 *= &f2;
    }
    let mut u = Complex::with_val(bits, &t1 + &t2);
    let mut biggest = log2_mag(&t1).max(log2_mag(&t2));

    if winding != 0 {
        // e^{-2πibm} U + (1 - e^{-2πibm}) t1
        let mut phase_arg = Complex::with_val(bits, b * Float::with_val(bits, pi(bits) * 2i64 * winding));
        phase_arg *= Complex::with_val(bits, (0, -1));
        let phase = phase_arg.exp();
        let mut continued = Complex::with_val(bits, &phase * &u);
        let mut corr = Complex::with_val(bits, &one - &phase);
        corr *= &t1;
        biggest = biggest.max(log2_mag(&continued)).max(log2_mag(&corr));
        continued += &corr;
        u = continued;
    }
    let lost = ((biggest - log2_mag(&u)) / LOG2_10).max(0.0);
    Ok((u, lost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::log10_mag;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    fn rel_err(a: &Complex, b: &Complex) -> f64 {
        let d = Complex::with_val(a.prec().0.max(b.prec().0), a - b);
        if d.is_zero() {
            return f64::NEG_INFINITY;
        }
        log10_mag(&d) - log10_mag(b)
    }

    #[test]
    fn pochhammer_values() {
        let c = ctx(30);
        assert_eq!(pochhammer(&c.complex(3.5, 1.0), 0, &c), c.complex(1.0, 0.0));
        assert_eq!(pochhammer(&c.complex(1.0, 0.0), 5, &c), c.complex(120.0, 0.0));
        // (2+i)(3+i)(4+i) = (5+5i)(4+i) = 15 + 25i
        let v = pochhammer(&c.complex(2.0, 1.0), 3, &c);
        assert_eq!(v, c.complex(15.0, 25.0));
    }

    #[test]
    fn f_at_zero_and_exponential_identity() {
        let c = ctx(40);
        let p = KummerParams::new(c.complex(0.3, 2.0), c.complex(1.7, -0.4), c.complex(0.0, 0.0));
        assert_eq!(kummer_f(&p, &c).unwrap(), c.complex(1.0, 0.0));
        let eta = c.complex(-3.0, 7.5);
        let p = KummerParams::new(c.complex(2.2, 0.5), c.complex(2.2, 0.5), eta.clone());
        let f = kummer_f(&p, &c).unwrap();
        let e = Complex::with_val(c.bits(), eta.exp_ref());
        assert!(rel_err(&f, &e) < -40.0);
    }

    #[test]
    fn f_large_negative_argument_escalates() {
        // F(a, a, -60) = e^-60 needs ~52 digits of headroom
        let c = ctx(30);
        let p = KummerParams::new(c.complex(1.5, 0.0), c.complex(1.5, 0.0), c.complex(-120.0, 0.0));
        let f = kummer_f(&p, &c).unwrap();
        let e = Complex::with_val(c.bits(), c.complex(-120.0, 0.0).exp_ref());
        assert!(rel_err(&f, &e) < -30.0);
    }

    #[test]
    fn f_rejects_nonpositive_integer_b() {
        let c = ctx(30);
        let p = KummerParams::new(c.complex(0.5, 0.0), c.complex(-2.0, 0.0), c.complex(1.0, 0.0));
        assert!(matches!(kummer_f(&p, &c), Err(Error::DegenerateParameter(_))));
    }

    #[test]
    fn f_exhausts_under_tight_cap() {
        let c = PrecisionContext::with_policy(20, 5, 25).unwrap();
        let p = KummerParams::new(c.complex(1.0, 0.0), c.complex(1.0, 0.0), c.complex(-200.0, 0.0));
        assert!(matches!(kummer_f(&p, &c), Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn u_closed_form_b_equals_a_plus_one() {
        // U(a, a+1, z) = z^{-a}
        let c = ctx(40);
        let a = c.complex(0.7, 1.3);
        let mut b = a.clone();
        b += 1u32;
        let z = c.complex(2.0, -5.0);
        let u = kummer_u(&KummerParams::new(a.clone(), b, z.clone()), &c).unwrap();
        let expect = Complex::with_val(c.bits(), (-a) * Complex::with_val(c.bits(), z.ln_ref())).exp();
        assert!(rel_err(&u, &expect) < -38.0);
    }

    #[test]
    fn u_sheet_matches_continued_power() {
        // for U(a, a+1, z) = z^{-a} the sheet enters only through log z
        let c = ctx(40);
        let a = c.complex(0.25, -0.6);
        let mut b = a.clone();
        b += 1u32;
        let z = c.complex(-1.0, 3.0);
        for m in [-2i64, 1, 3] {
            let u = kummer_u(&KummerParams::new(a.clone(), b.clone(), z.clone()).on_sheet(m), &c).unwrap();
            let mut lz = Complex::with_val(c.bits(), z.ln_ref());
            *lz.mut_imag() += pi(c.bits()) * 2i64 * m;
            let expect = Complex::with_val(c.bits(), (-a.clone()) * lz).exp();
            assert!(rel_err(&u, &expect) < -36.0, "sheet {m}");
        }
    }

    #[test]
    fn u_integer_b_surrogate_is_continuous() {
        // b = 1 exactly versus b = 1 + 1e-12 (handled by the regular path)
        let c = ctx(40);
        let a = c.complex(0.0, 10.0);
        let z = c.complex(0.0, 20.0);
        let u0 = kummer_u(&KummerParams::new(a.clone(), c.complex(1.0, 0.0), z.clone()), &c).unwrap();
        let u1 = kummer_u(&KummerParams::new(a, c.complex(1.0 + 1e-12, 0.0), z), &c).unwrap();
        let e = rel_err(&u1, &u0);
        assert!(e < -9.0 && e > -14.0, "{e}");
    }
}
