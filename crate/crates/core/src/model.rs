//! Loop parametrization, instantaneous Hamiltonian and its biorthogonal
//! eigensystem.
//!
//! The Hamiltonian is H(θ) = κ σ_x + h_z(θ) σ_z with
//! h_z(θ) = i (g0 − ρ e^{iθ}); the drive angle runs as θ = θ_i + ωt
//! (counter-clockwise) or θ = θ_i − ωt (clockwise). The two exceptional
//! points sit at h_z = ±iκ.
//!
//! Loop parameters are exact rationals and angles are exact combinations
//! `r + qπ`, so that e.g. θ_i = π or κ/ω = 10 are represented without
//! binary rounding at any working precision.

use std::fmt;
use std::str::FromStr;

use rug::{Complex, Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat2};
use crate::precision::{log2_mag, parse_rational, pi, rational_from_f64, PrecisionContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ccw,
    Cw,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::Ccw => 1,
            Direction::Cw => -1,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Ccw => Direction::Cw,
            Direction::Cw => Direction::Ccw,
        }
    }

    pub fn index(self) -> u64 {
        match self {
            Direction::Ccw => 0,
            Direction::Cw => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ccw => "ccw",
            Direction::Cw => "cw",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ccw" => Ok(Direction::Ccw),
            "cw" => Ok(Direction::Cw),
            other => Err(Error::InvalidInput(format!("direction must be ccw or cw, got '{other}'"))),
        }
    }
}

/// An exact angle `radians + pi_multiple·π`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Angle {
    radians: Rational,
    pi_multiple: Rational,
}

impl Angle {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pi_multiple(q: impl Into<Rational>) -> Self {
        Self {
            radians: Rational::new(),
            pi_multiple: q.into(),
        }
    }

    pub fn radians(q: impl Into<Rational>) -> Self {
        Self {
            radians: q.into(),
            pi_multiple: Rational::new(),
        }
    }

    /// `x·π` where `x` is given in decimal (0.75 → 3π/4 exactly).
    pub fn pi_times(x: f64) -> Result<Self> {
        Ok(Self::pi_multiple(rational_from_f64(x)?))
    }

    pub fn from_radians_f64(v: f64) -> Result<Self> {
        Ok(Self::radians(rational_from_f64(v)?))
    }

    pub fn to_float(&self, bits: u32) -> Float {
        let mut t = Float::with_val(bits, &self.pi_multiple);
        t *= pi(bits);
        t += &self.radians;
        t
    }

    pub fn to_f64(&self) -> f64 {
        self.radians.to_f64() + self.pi_multiple.to_f64() * std::f64::consts::PI
    }

    pub fn plus(&self, other: &Angle) -> Angle {
        Angle {
            radians: Rational::from(&self.radians + &other.radians),
            pi_multiple: Rational::from(&self.pi_multiple + &other.pi_multiple),
        }
    }

    pub fn minus(&self, other: &Angle) -> Angle {
        self.plus(&other.negated())
    }

    pub fn negated(&self) -> Angle {
        Angle {
            radians: Rational::from(-&self.radians),
            pi_multiple: Rational::from(-&self.pi_multiple),
        }
    }

    pub fn scaled(&self, k: &Rational) -> Angle {
        Angle {
            radians: Rational::from(&self.radians * k),
            pi_multiple: Rational::from(&self.pi_multiple * k),
        }
    }

    /// The angle plus `turns` full turns of 2π.
    pub fn plus_turns(&self, turns: i64) -> Angle {
        self.plus(&Angle::pi_multiple(Rational::from(2 * turns)))
    }

    pub fn is_pi_multiple_of(&self, q: &Rational) -> bool {
        self.radians == 0 && &self.pi_multiple == q
    }

    pub fn radians_part(&self) -> &Rational {
        &self.radians
    }

    pub fn pi_part(&self) -> &Rational {
        &self.pi_multiple
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_q = |q: &Rational| {
            if *q.denom() == 1 {
                q.numer().to_string()
            } else {
                format!("{}/{}", q.numer(), q.denom())
            }
        };
        match (self.radians == 0, self.pi_multiple == 0) {
            (true, true) => f.write_str("0"),
            (true, false) => write!(f, "{}pi", fmt_q(&self.pi_multiple)),
            (false, true) => f.write_str(&fmt_q(&self.radians)),
            (false, false) => write!(f, "{}+{}pi", fmt_q(&self.radians), fmt_q(&self.pi_multiple)),
        }
    }
}

impl FromStr for Angle {
    type Err = Error;

    /// Accepts `"1.25"` (radians), `"pi"`, `"-pi/2"`, `"0.75pi"`, `"3pi/4"`,
    /// `"3/4pi"` and sums of those joined by `+`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(Error::InvalidInput("empty angle".into()));
        }
        let mut total = Angle::zero();
        // split on '+' that is not part of an exponent
        let mut parts = Vec::new();
        let mut start = 0;
        let bytes = t.as_bytes();
        for i in 1..bytes.len() {
            if bytes[i] == b'+' && !matches!(bytes[i - 1], b'e' | b'E') {
                parts.push(&t[start..i]);
                start = i + 1;
            }
        }
        parts.push(&t[start..]);
        for part in parts {
            total = total.plus(&parse_angle_term(part)?);
        }
        Ok(total)
    }
}

fn parse_angle_term(t: &str) -> Result<Angle> {
    let bad = || Error::InvalidInput(format!("cannot parse angle '{t}'"));
    if let Some(idx) = t.find("pi") {
        let coeff = &t[..idx];
        let rest = &t[idx + 2..];
        let mut q = match coeff {
            "" | "+" => Rational::from(1),
            "-" => Rational::from(-1),
            c => parse_rational(c.trim_end_matches('*')).map_err(|_| bad())?,
        };
        if let Some(den) = rest.strip_prefix('/') {
            let d = parse_rational(den).map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            q /= d;
        } else if !rest.is_empty() {
            return Err(bad());
        }
        Ok(Angle::pi_multiple(q))
    } else {
        Ok(Angle::radians(parse_rational(t).map_err(|_| bad())?))
    }
}

impl Serialize for Angle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter storing rationals as decimal/fraction strings.
pub mod rational_str {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        crate::precision::parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Terminating decimals print as decimals, everything else as `n/d`.
pub fn format_rational(q: &Rational) -> String {
    let mut d = q.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d.is_divisible_u(2) {
        d /= 2u32;
        twos += 1;
    }
    while d.is_divisible_u(5) {
        d /= 5u32;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let scale = twos.max(fives);
    if scale == 0 {
        return q.numer().to_string();
    }
    let factor = rug::Integer::from(rug::Integer::u_pow_u(10, scale));
    let scaled = rug::Integer::from(q.numer() * &factor) / q.denom();
    let neg = scaled < 0;
    let digits = rug::Integer::from(scaled.abs_ref()).to_string();
    let digits = format!("{digits:0>width$}", width = scale as usize + 1);
    let (int, frac) = digits.split_at(digits.len() - scale as usize);
    let frac = frac.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// One encircling experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    #[serde(with = "rational_str")]
    pub kappa: Rational,
    #[serde(with = "rational_str")]
    pub g0: Rational,
    #[serde(with = "rational_str")]
    pub rho: Rational,
    pub theta_i: Angle,
    #[serde(with = "rational_str")]
    pub omega: Rational,
    pub direction: Direction,
}

impl LoopSpec {
    /// Counter-clockwise loop from decimal parameters (read exactly as written).
    pub fn new(kappa: f64, g0: f64, rho: f64, theta_i: Angle, omega: f64) -> Result<Self> {
        let spec = Self {
            kappa: rational_from_f64(kappa)?,
            g0: rational_from_f64(g0)?,
            rho: rational_from_f64(rho)?,
            theta_i,
            omega: rational_from_f64(omega)?,
            direction: Direction::Ccw,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// κ = 1 loop with ω = 1/inv_omega exactly.
    pub fn unit(g0: f64, rho: f64, theta_i: Angle, inv_omega: f64) -> Result<Self> {
        let inv = rational_from_f64(inv_omega)?;
        if inv <= 0 {
            return Err(Error::InvalidInput("1/omega must be positive".into()));
        }
        let spec = Self {
            kappa: Rational::from(1),
            g0: rational_from_f64(g0)?,
            rho: rational_from_f64(rho)?,
            theta_i,
            omega: inv.recip(),
            direction: Direction::Ccw,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Loop-A family: circle through the origin, g0 = ρ.
    pub fn loop_a(rho: f64, theta_i: Angle, inv_omega: f64) -> Result<Self> {
        Self::unit(rho, rho, theta_i, inv_omega)
    }

    /// Loop-B family: circle centred at the origin, g0 = 0.
    pub fn loop_b(rho: f64, theta_i: Angle, inv_omega: f64) -> Result<Self> {
        Self::unit(0.0, rho, theta_i, inv_omega)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_theta_i(mut self, theta_i: Angle) -> Self {
        self.theta_i = theta_i;
        self
    }

    pub fn with_inv_omega(mut self, inv_omega: Rational) -> Result<Self> {
        if inv_omega <= 0 {
            return Err(Error::InvalidInput("1/omega must be positive".into()));
        }
        self.omega = inv_omega.recip();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa <= 0 {
            return Err(Error::InvalidInput("kappa must be > 0".into()));
        }
        if self.rho < 0 {
            return Err(Error::InvalidInput("rho must be >= 0".into()));
        }
        if self.omega <= 0 {
            return Err(Error::InvalidInput("omega must be > 0".into()));
        }
        Ok(())
    }

    pub fn period_f64(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega.to_f64()
    }

    pub fn period(&self, bits: u32) -> Float {
        let mut t = pi(bits) * 2u32;
        t /= &self.omega;
        Float::with_val(bits, t)
    }

    /// Final angle of one full cycle: θ_i ± 2π.
    pub fn theta_one_cycle(&self) -> Angle {
        self.theta_i.plus_turns(self.direction.sign() as i64)
    }

    /// θ(t) = θ_i ± ωt.
    pub fn theta_at(&self, t: &Float) -> Float {
        let bits = t.prec();
        let mut th = Float::with_val(bits, t * &self.omega);
        if self.direction == Direction::Cw {
            th = -th;
        }
        th += self.theta_i.to_float(bits);
        th
    }

    /// h_z(θ) = i(g0 − ρ e^{iθ}).
    pub fn h_z(&self, theta: &Float) -> Complex {
        let bits = theta.prec();
        let (s, c) = Float::with_val(bits, theta).sin_cos(Float::new(bits));
        // -ρ e^{iθ} + g0, then multiply by i
        let re = Float::with_val(bits, &self.g0 - Float::with_val(bits, &c * &self.rho));
        let im = Float::with_val(bits, -Float::with_val(bits, &s * &self.rho));
        Complex::with_val(bits, (-im, re))
    }

    /// The principal eigenvalue √(κ² + h_z²) at angle θ (Re ≥ 0, Im > 0 on a tie).
    pub fn lambda(&self, theta: &Float) -> Complex {
        let bits = theta.prec();
        let h = self.h_z(theta);
        principal_sqrt(&lambda_squared(&self.kappa, &h, bits))
    }

    /// Number of exceptional points strictly inside the loop.
    pub fn count_encircled_eps(&self) -> Result<u8> {
        let mut n = 0;
        for sign in [-1i32, 1] {
            let dist = Rational::from(&self.g0 + Rational::from(&self.kappa * sign)).abs();
            let gap = Rational::from(&self.rho - &dist);
            let scale = self.rho.to_f64().abs().max(dist.to_f64()).max(1e-300);
            if gap.to_f64().abs() <= 1e-12 * scale {
                return Err(Error::OnBoundary);
            }
            if gap > 0 {
                n += 1;
            }
        }
        Ok(n)
    }
}

fn lambda_squared(kappa: &Rational, h: &Complex, bits: u32) -> Complex {
    let mut l2 = Complex::with_val(bits, h.square_ref());
    *l2.mut_real() += Float::with_val(bits, Rational::from(kappa * kappa));
    l2
}

fn principal_sqrt(z: &Complex) -> Complex {
    let bits = z.prec().0;
    let mut r = Complex::with_val(bits, z.sqrt_ref());
    // roundoff in sin θ at θ = kπ must not decide the label
    let slack = Float::with_val(bits, r.imag().abs_ref()) >> (bits.saturating_sub(16) as i32);
    if Float::with_val(bits, r.real().abs_ref()) <= slack && r.imag().is_sign_negative() {
        r = -r;
    }
    r
}

/// H(t) = κσ_x + h_z(θ(t))σ_z at time t ∈ [0, T].
pub fn hamiltonian(spec: &LoopSpec, t: f64, ctx: &PrecisionContext) -> Result<Mat2> {
    spec.validate()?;
    let bits = ctx.bits();
    let period = spec.period_f64();
    if !(0.0..=period * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::InvalidInput(format!("t = {t} outside [0, {period}]")));
    }
    let theta = spec.theta_at(&Float::with_val(bits, t));
    Ok(hamiltonian_at_theta(spec, &theta))
}

pub fn hamiltonian_at_theta(spec: &LoopSpec, theta: &Float) -> Mat2 {
    let bits = theta.prec();
    let h = spec.h_z(theta);
    let k = Complex::with_val(bits, &spec.kappa);
    Mat2::new(h.clone(), k.clone(), k, -h)
}

/// Column vector (a, b)^T; left eigenvectors reuse it as row coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub a: Complex,
    pub b: Complex,
}

impl StateVector {
    pub fn new(a: Complex, b: Complex) -> Self {
        Self { a, b }
    }

    pub fn as_array(&self) -> [Complex; 2] {
        [self.a.clone(), self.b.clone()]
    }

    pub fn from_array([a, b]: [Complex; 2]) -> Self {
        Self { a, b }
    }

    pub fn dot(&self, other: &StateVector) -> Complex {
        dot(&self.as_array(), &other.as_array())
    }
}

/// Instantaneous biorthogonal eigensystem of H(θ).
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFrame {
    pub lambda_plus: Complex,
    pub lambda_minus: Complex,
    pub r_plus: StateVector,
    pub r_minus: StateVector,
    pub l_plus: StateVector,
    pub l_minus: StateVector,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum LabelPolicy<'a> {
    PrincipalBranch,
    ContinuedFrom(&'a EigenFrame),
}

impl EigenFrame {
    /// Same eigensystem with the ± labels exchanged.
    pub fn swapped(&self) -> EigenFrame {
        EigenFrame {
            lambda_plus: self.lambda_minus.clone(),
            lambda_minus: self.lambda_plus.clone(),
            r_plus: self.r_minus.clone(),
            r_minus: self.r_plus.clone(),
            l_plus: self.l_minus.clone(),
            l_minus: self.l_plus.clone(),
            theta: self.theta,
        }
    }

    pub fn right(&self, plus: bool) -> &StateVector {
        if plus {
            &self.r_plus
        } else {
            &self.r_minus
        }
    }

    pub fn left(&self, plus: bool) -> &StateVector {
        if plus {
            &self.l_plus
        } else {
            &self.l_minus
        }
    }

    /// max |⟨L_α|R_β⟩ − δ_αβ|.
    pub fn biorthonormality_error(&self) -> f64 {
        let mut worst = 0f64;
        for (i, l) in [&self.l_plus, &self.l_minus].into_iter().enumerate() {
            for (j, r) in [&self.r_plus, &self.r_minus].into_iter().enumerate() {
                let mut d = l.dot(r);
                if i == j {
                    d -= 1u32;
                }
                let e = 10f64.powf(crate::precision::log10_mag(&d));
                worst = worst.max(e);
            }
        }
        worst
    }
}

/// Eigenframe of H at angle θ.
pub fn eigenframe(
    spec: &LoopSpec,
    theta: &Angle,
    ctx: &PrecisionContext,
    policy: LabelPolicy<'_>,
) -> Result<EigenFrame> {
    eigenframe_at(spec, &theta.to_float(ctx.bits()), ctx, policy)
}

pub fn eigenframe_at(
    spec: &LoopSpec,
    theta: &Float,
    ctx: &PrecisionContext,
    policy: LabelPolicy<'_>,
) -> Result<EigenFrame> {
    let bits = ctx.bits();
    let theta = Float::with_val(bits, theta);
    let h = spec.h_z(&theta);
    let l2 = lambda_squared(&spec.kappa, &h, bits);
    let k2 = Float::with_val(bits, Rational::from(&spec.kappa * &spec.kappa));
    let tol_log2 = crate::precision::log2_float(&k2)
        - (ctx.digits() as f64 / 2.0) * std::f64::consts::LOG2_10;
    if log2_mag(&l2) < tol_log2 {
        return Err(Error::EpDegeneracy {
            theta: theta.to_f64(),
        });
    }
    let lam = principal_sqrt(&l2);
    let kappa = Complex::with_val(bits, &spec.kappa);
    let right = |mu: &Complex| -> StateVector {
        // (κ, μ − h) and (μ + h, κ) span the same line; keep the larger one
        let v1 = [kappa.clone(), Complex::with_val(bits, mu - &h)];
        let v2 = [Complex::with_val(bits, mu + &h), kappa.clone()];
        let n = |v: &[Complex; 2]| {
            Float::with_val(bits, v[0].norm_ref()) + Float::with_val(bits, v[1].norm_ref())
        };
        let (n1, n2) = (n(&v1), n(&v2));
        let (v, nn) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        let norm = Float::with_val(bits, nn.sqrt());
        StateVector::new(
            Complex::with_val(bits, &v[0] / &norm),
            Complex::with_val(bits, &v[1] / &norm),
        )
    };
    let left = |r: &StateVector| -> StateVector {
        // H is symmetric, so ⟨L| ∝ |R⟩^T with the bilinear normalization
        let rr = r.dot(r);
        StateVector::new(
            Complex::with_val(bits, &r.a / &rr),
            Complex::with_val(bits, &r.b / &rr),
        )
    };
    let neg = Complex::with_val(bits, -&lam);
    let r_plus = right(&lam);
    let r_minus = right(&neg);
    let frame = EigenFrame {
        l_plus: left(&r_plus),
        l_minus: left(&r_minus),
        r_plus,
        r_minus,
        lambda_plus: lam,
        lambda_minus: neg,
        theta: theta.to_f64(),
    };
    Ok(match policy {
        LabelPolicy::PrincipalBranch => frame,
        LabelPolicy::ContinuedFrom(prior) => {
            let ov = |l: &StateVector, r: &StateVector| {
                let d = Complex::with_val(bits, l.dot(r));
                Float::with_val(bits, d.abs_ref())
            };
            let keep = Float::with_val(bits, ov(&prior.l_plus, &frame.r_plus) * ov(&prior.l_minus, &frame.r_minus));
            let swap = Float::with_val(bits, ov(&prior.l_plus, &frame.r_minus) * ov(&prior.l_minus, &frame.r_plus));
            if swap > keep {
                frame.swapped()
            } else {
                frame
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(40).unwrap()
    }

    #[test]
    fn angle_parsing_and_display() {
        let a: Angle = "3pi/4".parse().unwrap();
        assert_eq!(a, Angle::pi_multiple(Rational::from((3, 4))));
        assert_eq!("0.75pi".parse::<Angle>().unwrap(), a);
        assert_eq!("-pi".parse::<Angle>().unwrap(), Angle::pi_multiple(-1));
        assert_eq!("pi".parse::<Angle>().unwrap().to_string(), "1pi");
        let b: Angle = "0.5+2pi".parse().unwrap();
        assert_eq!(b.to_string(), "1/2+2pi");
        assert_eq!(b.to_string().parse::<Angle>().unwrap(), b);
        assert!("pix".parse::<Angle>().is_err());
        assert!((Angle::pi_times(0.8).unwrap().to_f64() - 0.8 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn rational_formatting() {
        assert_eq!(format_rational(&Rational::from((1, 10))), "0.1");
        assert_eq!(format_rational(&Rational::from((-1, 400))), "-0.0025");
        assert_eq!(format_rational(&Rational::from((1, 3))), "1/3");
        assert_eq!(format_rational(&Rational::from(7)), "7");
    }

    #[test]
    fn hamiltonian_examples() {
        let c = ctx();
        let l = LoopSpec::new(1.0, 1.0, 1.0, Angle::zero(), 0.2).unwrap();
        let h = hamiltonian(&l, 0.0, &c).unwrap();
        assert!(h.m[0][0].is_zero());
        assert_eq!(h.m[0][1], 1.0);
        let l = LoopSpec::new(1.0, 1.0, 1.0, Angle::pi_multiple(1), 0.2).unwrap();
        let h = hamiltonian(&l, 0.0, &c).unwrap();
        assert!((h.m[0][0].imag().to_f64() - 2.0).abs() < 1e-40);
        assert!(h.m[0][0].real().to_f64().abs() < 1e-40);
        // half period on the ρ = 3 loop: h_z = 4i
        let l = LoopSpec::new(1.0, 1.0, 3.0, Angle::zero(), 0.2).unwrap();
        let t = std::f64::consts::PI / 0.2;
        let h = hamiltonian(&l, t, &c).unwrap();
        assert!((h.m[0][0].imag().to_f64() - 4.0).abs() < 1e-12);
        assert!(h.trace().is_zero());
        assert!(hamiltonian(&l, -1.0, &c).is_err());
    }

    #[test]
    fn eigenframe_pure_sigma_x() {
        let c = ctx();
        let l = LoopSpec::new(1.0, 1.0, 1.0, Angle::zero(), 0.2).unwrap();
        let f = eigenframe(&l, &Angle::zero(), &c, LabelPolicy::PrincipalBranch).unwrap();
        assert!((f.lambda_plus.real().to_f64() - 1.0).abs() < 1e-40);
        let ratio = Complex::with_val(c.bits(), &f.r_plus.b / &f.r_plus.a);
        assert!((ratio.real().to_f64() - 1.0).abs() < 1e-40);
        let ratio = Complex::with_val(c.bits(), &f.r_minus.b / &f.r_minus.a);
        assert!((ratio.real().to_f64() + 1.0).abs() < 1e-40);
        assert!(f.biorthonormality_error() < 1e-36);
    }

    #[test]
    fn eigenframe_broken_phase_principal_label() {
        let c = ctx();
        let l = LoopSpec::new(1.0, 1.0, 1.0, Angle::zero(), 0.2).unwrap();
        let f = eigenframe(&l, &Angle::pi_multiple(1), &c, LabelPolicy::PrincipalBranch).unwrap();
        assert!(f.lambda_plus.real().to_f64().abs() < 1e-40);
        assert!((f.lambda_plus.imag().to_f64() - 3f64.sqrt()).abs() < 1e-14);
        let sum = Complex::with_val(c.bits(), &f.lambda_plus + &f.lambda_minus);
        assert!(sum.is_zero());
    }

    #[test]
    fn eigenframe_rejects_exceptional_point() {
        // h_z = i exactly: g0 = 0, ρ = 1, θ = π/2 gives h_z = i(0 − i) = 1? use θ = π, g0 = 0, ρ = 1 → h = i
        let c = ctx();
        let l = LoopSpec::new(1.0, 0.0, 1.0, Angle::zero(), 0.2).unwrap();
        let r = eigenframe(&l, &Angle::pi_multiple(1), &c, LabelPolicy::PrincipalBranch);
        assert!(matches!(r, Err(Error::EpDegeneracy { .. })));
    }

    #[test]
    fn encircled_ep_counts() {
        let l = |g0, rho| LoopSpec::new(1.0, g0, rho, Angle::zero(), 0.1).unwrap();
        assert_eq!(l(1.0, 1.0).count_encircled_eps().unwrap(), 1);
        assert_eq!(l(1.0, 3.0).count_encircled_eps().unwrap(), 2);
        assert_eq!(l(0.0, 0.4).count_encircled_eps().unwrap(), 0);
        assert!(matches!(l(1.0, 2.0).count_encircled_eps(), Err(Error::OnBoundary)));
    }

    #[test]
    fn loop_spec_validation() {
        assert!(LoopSpec::new(1.0, 1.0, 1.0, Angle::zero(), 0.0).is_err());
        assert!(LoopSpec::new(0.0, 1.0, 1.0, Angle::zero(), 0.1).is_err());
        assert!(LoopSpec::new(1.0, 1.0, -1.0, Angle::zero(), 0.1).is_err());
        let l = LoopSpec::unit(1.0, 1.0, Angle::zero(), 10.0).unwrap();
        assert_eq!(l.omega, Rational::from((1, 10)));
        let json = serde_json::to_string(&l).unwrap();
        let back: LoopSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);
    }
}
