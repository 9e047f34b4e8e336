//! Complex gamma function at arbitrary precision.
//!
//! Stirling's series for ln Γ(w) with the argument first shifted upward by
//! the recurrence Γ(z) = Γ(z+n) / (z)_n until Re w exceeds a threshold that
//! grows with the requested digits. The series coefficients
//! B_{2k} / (2k(2k-1)) are obtained from ζ(2k) and cached per precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::precision::{bits_to_digits, log2_mag, pi, PrecisionContext};

/// Γ(z) accurate to the context's working digits.
pub fn gamma_complex(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let g = gamma_bits(z, ctx.bits(), ctx.digits())?;
    Ok(Complex::with_val(ctx.bits(), g))
}

/// ln Γ(z) on the branch obtained from the upward shift (not reduced to the
/// principal strip). Useful when Γ(z) itself over- or underflows a display.
pub fn ln_gamma_complex(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    check_pole(z, ctx.digits())?;
    Ok(Complex::with_val(ctx.bits(), ln_gamma_shifted(z, ctx.bits())))
}

/// 1/Γ(z), which is entire: exactly zero at the poles of Γ.
pub(crate) fn recip_gamma_bits(z: &Complex, bits: u32) -> Complex {
    let digits = bits_to_digits(bits);
    if near_pole(z, digits) {
        return Complex::new(bits);
    }
    let g = gamma_unchecked(z, bits);
    Complex::with_val(bits, g.recip())
}

/// Γ(z) at `bits` working precision; poles are rejected within 10^-pole_digits.
pub(crate) fn gamma_bits(z: &Complex, bits: u32, pole_digits: u32) -> Result<Complex> {
    check_pole(z, pole_digits)?;
    Ok(gamma_unchecked(z, bits))
}

fn check_pole(z: &Complex, digits: u32) -> Result<()> {
    if near_pole(z, digits) {
        return Err(Error::Pole(format!(
            "{}",
            Complex::with_val(64, z)
        )));
    }
    Ok(())
}

fn near_pole(z: &Complex, digits: u32) -> bool {
    let re = z.real();
    if *re > 0.5 {
        return false;
    }
    let nearest = Float::with_val(re.prec(), re.round_ref());
    let mut d = Complex::with_val(z.prec().0.max(64), z);
    *d.mut_real() -= &nearest;
    log2_mag(&d) < -(digits as f64) * std::f64::consts::LOG2_10
}

fn gamma_unchecked(z: &Complex, bits: u32) -> Complex {
    let digits = bits_to_digits(bits).max(16);
    let threshold = digits as f64;
    let re = z.real().to_f64();
    let shift = if re < threshold {
        (threshold - re).ceil() as u64
    } else {
        0
    };
    // distance to the closest pole costs relative accuracy in the shift product
    let mut extra = 32 + (shift.max(1) as f64).log2().ceil() as u32;
    if re <= 0.5 {
        let r = z.real().to_f64().round();
        let mut d = Complex::with_val(bits + 64, z);
        *d.mut_real() -= r;
        let l = log2_mag(&d);
        if l.is_finite() && l < 0.0 {
            extra += (-l).ceil() as u32;
        }
    }
    let wbits = bits + extra;
    let mut w = Complex::with_val(wbits, z);
    let mut prod = Complex::with_val(wbits, 1);
    for _ in 0..shift {
        prod *= &w;
        w += 1u32;
    }
    let lg = ln_gamma_stirling(&w, wbits);
    let mut g = lg.exp();
    if shift > 0 {
        g /= &prod;
    }
    Complex::with_val(bits, g)
}

fn ln_gamma_shifted(z: &Complex, bits: u32) -> Complex {
    let digits = bits_to_digits(bits).max(16) as f64;
    let re = z.real().to_f64();
    let shift = if re < digits {
        (digits - re).ceil() as u64
    } else {
        0
    };
    let wbits = bits + 32 + (shift.max(1) as f64).log2().ceil() as u32;
    let mut w = Complex::with_val(wbits, z);
    let mut prod = Complex::with_val(wbits, 1);
    for _ in 0..shift {
        prod *= &w;
        w += 1u32;
    }
    let mut lg = ln_gamma_stirling(&w, wbits);
    if shift > 0 {
        lg -= prod.ln();
    }
    lg
}

/// Stirling series; requires Re w large enough for the requested bits.
fn ln_gamma_stirling(w: &Complex, bits: u32) -> Complex {
    let two_pi = Float::with_val(bits, pi(bits) * 2u32);
    let half_ln_2pi = Float::with_val(bits, two_pi.ln() / 2u32);
    let ln_w = Complex::with_val(bits, w.ln_ref());
    let mut w_half = Complex::with_val(bits, w);
    w_half -= 0.5;
    let mut sum = Complex::with_val(bits, &w_half * &ln_w);
    sum -= w;
    sum += &half_ln_2pi;

    let inv_w = Complex::with_val(bits, w.recip_ref());
    let inv_w2 = Complex::with_val(bits, inv_w.square_ref());
    let mut pow = inv_w;
    let target = -(bits as f64) - 4.0;
    let mut k = 1usize;
    loop {
        let c = stirling_coefficient(k, bits);
        let term = Complex::with_val(bits, &pow * &*c);
        let small = log2_mag(&term) - log2_mag(&sum).max(0.0) < target;
        sum += &term;
        if small || k > 20 * bits as usize {
            break;
        }
        pow *= &inv_w2;
        k += 1;
    }
    sum
}

type CoeffTable = HashMap<u32, Arc<Mutex<Vec<Arc<Float>>>>>;

fn coefficient_table() -> &'static Mutex<CoeffTable> {
    static TABLE: OnceLock<Mutex<CoeffTable>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// c_k = B_{2k} / (2k(2k-1)) = (-1)^{k+1} 2 (2k-2)! ζ(2k) / (2π)^{2k}.
fn stirling_coefficient(k: usize, bits: u32) -> Arc<Float> {
    let slot = {
        let mut table = coefficient_table().lock().expect("coefficient cache poisoned");
        table.entry(bits).or_default().clone()
    };
    let mut coeffs = slot.lock().expect("coefficient cache poisoned");
    while coeffs.len() < k {
        let j = coeffs.len() + 1;
        let p = bits + 32;
        let two_k = 2 * j as u32;
        let mut c = Float::with_val(p, Float::factorial(two_k - 2));
        c *= Float::with_val(p, Float::zeta_u(two_k));
        c *= 2u32;
        let two_pi = Float::with_val(p, pi(p) * 2u32);
        c /= Float::with_val(p, two_pi.pow(two_k));
        if j % 2 == 0 {
            c = -c;
        }
        coeffs.push(Arc::new(Float::with_val(bits, c)));
    }
    coeffs[k - 1].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::float::Constant;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    fn rel_err(a: &Complex, b: &Complex) -> f64 {
        let d = Complex::with_val(a.prec().0, a - b);
        crate::precision::log10_mag(&d) - crate::precision::log10_mag(b)
    }

    #[test]
    fn gamma_of_one_and_half() {
        let c = ctx(60);
        let g1 = gamma_complex(&c.complex(1.0, 0.0), &c).unwrap();
        assert!(rel_err(&g1, &c.complex(1.0, 0.0)) < -60.0);
        let g = gamma_complex(&c.complex(0.5, 0.0), &c).unwrap();
        let sqrt_pi = Float::with_val(c.bits(), Constant::Pi).sqrt();
        let expect = Complex::with_val(c.bits(), (sqrt_pi, 0));
        assert!(rel_err(&g, &expect) < -60.0);
        assert!(g.real().to_string().starts_with("1.77245385090551602"));
    }

    #[test]
    fn factorials() {
        let c = ctx(40);
        let g = gamma_complex(&c.complex(11.0, 0.0), &c).unwrap();
        assert!(rel_err(&g, &c.complex(3628800.0, 0.0)) < -40.0);
        let g = gamma_complex(&c.complex(200.0, 0.0), &c).unwrap();
        let f = Float::with_val(c.bits(), Float::factorial(199));
        assert!(rel_err(&g, &Complex::with_val(c.bits(), (f, 0))) < -40.0);
    }

    #[test]
    fn negative_half_integer() {
        // Γ(-1/2) = -2√π
        let c = ctx(50);
        let g = gamma_complex(&c.complex(-0.5, 0.0), &c).unwrap();
        let expect = Float::with_val(c.bits(), Constant::Pi).sqrt() * -2i32;
        let expect = Complex::with_val(c.bits(), (expect, 0));
        assert!(rel_err(&g, &expect) < -50.0);
    }

    #[test]
    fn poles_are_rejected() {
        let c = ctx(30);
        for p in [0.0, -1.0, -7.0] {
            assert!(matches!(
                gamma_complex(&c.complex(p, 0.0), &c),
                Err(Error::Pole(_))
            ));
        }
        assert!(gamma_complex(&c.complex(-1.0, 1e-10), &c).is_ok());
        let r = recip_gamma_bits(&c.complex(-3.0, 0.0), c.bits());
        assert!(r.is_zero());
    }

    #[test]
    fn modulus_on_imaginary_axis() {
        // |Γ(iy)|² = π / (y sinh(πy))
        let c = ctx(50);
        let y = 10.0;
        let g = gamma_complex(&c.complex(0.0, y), &c).unwrap();
        let n2 = Float::with_val(c.bits(), g.norm_ref());
        let mut expect = Float::with_val(c.bits(), Constant::Pi);
        let sh = Float::with_val(c.bits(), Float::with_val(c.bits(), Constant::Pi) * y).sinh();
        expect /= sh * y;
        let d = Float::with_val(c.bits(), &n2 - &expect) / &expect;
        assert!(crate::precision::log10_float(&d) < -50.0);
    }

    #[test]
    fn deterministic() {
        let c = ctx(80);
        let z = c.complex(0.3, -4.7);
        let a = gamma_complex(&z, &c).unwrap();
        let b = gamma_complex(&z, &c).unwrap();
        assert_eq!(a, b);
    }
}
