//! Closed-form transfer matrices.
//!
//! With η = −2i(ρ/ω)e^{iθ} and a(t) = e^{its} e^{−η/2} W(η), s = √(κ² − g0²),
//! the amplitude a obeys Kummer's equation, so W = c1 F(p1, p2, η) + c2 U(p1, p2, η)
//! with p1 = (ig0 + s)/ω and p2 = 1 + 2s/ω. Writing (a, b)^T = e^{its} e^{−η/2} M(η) c,
//!
//! ```text
//! M(η) = [[ F⁰,                          U⁰                     ],
//!         [ −(ω/κ) p1 (F⁰ + (η/p2) F¹),   −(ω/κ) p1 (U⁰ − η U¹)  ]]
//! det M(η) = (ω/κ) Γ(p2)/Γ(p1) η^{1−p2} e^{η}
//! S(θf, θi) = (κ/ω) Γ(p1)/Γ(p2) η_i^{p2−1} e^{i(θf−θi)s/ω} e^{−(ηf+ηi)/2} M(ηf) adj M(ηi)
//! ```
//!
//! where Fⁿ = F(n+p1, n+p2, η) and Uⁿ likewise. The compact form with M
//! rescaled by 1/(ω p1) in its first row and the prefactor carrying an extra
//! p1 is the same expression: that M equals M above divided by ω p1
//! (taking κ = 1), and its M̃ is exactly adj M above, so the two scalings
//! cancel against the prefactor.
//!
//! Clockwise loops use the same formula with ω replaced by −ω. The sign of
//! s is chosen so that Re(s/ω) ≥ 0, which keeps Re p2 ≥ 1. η carries its
//! continuous argument θ ∓ π/2 (− for CCW, + for CW) so that U and η^{p2−1}
//! are evaluated on the sheet reached by following the loop.

use rug::{Complex, Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{Angle, Direction, LoopSpec};
use crate::precision::{log10_mag, pi, PrecisionContext};
use crate::special::gamma::gamma_complex;
use crate::special::kummer::{kummer_f, kummer_u, KummerParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    Integrated { steps: u64, epsilon: f64, seed: u64 },
}

/// Deviations from the exact symmetry properties. `None` means not evaluated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    /// |det S − 1|.
    pub det_residual: f64,
    /// |Tr S − 2cos(2πs/ω)| / max(1, |2cos(2πs/ω)|), full cycles only.
    pub trace_residual: Option<f64>,
    /// ‖S − σz P* σz‖/‖S‖ with P the reversed-direction matrix on the mirrored arc.
    pub conj_pair_residual: Option<f64>,
    /// ‖S − Q^T‖/‖S‖ with Q the reversed-direction matrix on the reversed arc.
    pub transpose_pair_residual: Option<f64>,
    /// ‖S − σz R† σz‖/‖S‖ with R = S(−θi, −θf) in the same direction.
    pub dagger_residual: Option<f64>,
    /// For θi a multiple of π and a full cycle: (|Im S11| + |Im S22| + |S12 + S21*|)/‖S‖.
    pub dagger_corollary_residual: Option<f64>,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        [
            Some(self.det_residual),
            self.trace_residual,
            self.conj_pair_residual,
            self.transpose_pair_residual,
            self.dagger_residual,
            self.dagger_corollary_residual,
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.max() < tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub s11: Complex,
    pub s12: Complex,
    pub s21: Complex,
    pub s22: Complex,
    pub theta_i: Angle,
    pub theta_f: Angle,
    pub direction: Direction,
    pub provenance: Provenance,
    pub residuals: SymmetryResiduals,
    /// Decimal digits the entries were computed with (before guard digits).
    pub digits: u32,
}

impl TransferMatrix {
    pub fn from_matrix(
        m: Mat2,
        theta_i: Angle,
        theta_f: Angle,
        direction: Direction,
        provenance: Provenance,
        digits: u32,
    ) -> Self {
        let [[s11, s12], [s21, s22]] = m.m;
        Self {
            s11,
            s12,
            s21,
            s22,
            theta_i,
            theta_f,
            direction,
            provenance,
            residuals: SymmetryResiduals::default(),
            digits,
        }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(
            self.s11.clone(),
            self.s12.clone(),
            self.s21.clone(),
            self.s22.clone(),
        )
    }

    pub fn det(&self) -> Complex {
        self.matrix().det()
    }

    pub fn trace(&self) -> Complex {
        self.matrix().trace()
    }
}

/// Matrices entering one evaluation of the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct KummerWork {
    pub m_f: Mat2,
    pub mtilde_i: Mat2,
    pub params_f: KummerParams,
    pub params_i: KummerParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticReport {
    pub s12_asym: Complex,
    pub s21_asym: Complex,
    /// arg(S21/S12) from the asymptotic expressions, in (−π, π].
    pub phi: f64,
    /// 4(1 + ρ + ln ρ)/ω − π in units of κ.
    pub phi_formula: f64,
    pub warning: Option<String>,
}

/// S(θf, θi) along `spec`, with automatic precision escalation and all
/// symmetry residuals populated.
pub fn transfer_matrix_exact(spec: &LoopSpec, theta_f: &Angle, ctx: &PrecisionContext) -> Result<TransferMatrix> {
    let (m, used) = transfer_escalating(spec, theta_f, ctx)?;
    let mut tm = TransferMatrix::from_matrix(
        m,
        spec.theta_i.clone(),
        theta_f.clone(),
        spec.direction,
        Provenance::Exact,
        used.digits(),
    );
    tm.residuals = residuals_with(spec, theta_f, &tm.matrix(), &used, &|sp, th| raw_transfer(sp, th, &used))?;
    Ok(tm)
}

/// One full cycle: θf = θi + 2π (CCW) or θi − 2π (CW).
pub fn transfer_one_cycle(spec: &LoopSpec, ctx: &PrecisionContext) -> Result<TransferMatrix> {
    transfer_matrix_exact(spec, &spec.theta_one_cycle(), ctx)
}

pub fn symmetry_check(spec: &LoopSpec, theta_f: &Angle, ctx: &PrecisionContext) -> Result<SymmetryResiduals> {
    Ok(transfer_matrix_exact(spec, theta_f, ctx)?.residuals)
}

/// Transfer matrix with only the det/trace checks, as used by observables.
/// Returns the matrix and the context it was computed with.
pub(crate) fn transfer_escalating(
    spec: &LoopSpec,
    theta_f: &Angle,
    ctx: &PrecisionContext,
) -> Result<(Mat2, PrecisionContext)> {
    spec.validate()?;
    check_reachable(spec, theta_f)?;
    let tol = ctx.residual_tolerance();
    let start = initial_digits(spec).max(ctx.digits()).min(ctx.max_digits());
    let mut cur = ctx.with_digits(start);
    loop {
        let attempt = raw_transfer(spec, theta_f, &cur);
        match attempt {
            Ok(m) => {
                let (det, trace) = det_trace_residuals(spec, theta_f, &m, &cur);
                let worst = det.max(trace.unwrap_or(0.0));
                if worst < tol {
                    return Ok((m, cur));
                }
                match cur.doubled() {
                    Some(next) => cur = next,
                    None => {
                        let mut best = TransferMatrix::from_matrix(
                            m,
                            spec.theta_i.clone(),
                            theta_f.clone(),
                            spec.direction,
                            Provenance::Exact,
                            cur.digits(),
                        );
                        best.residuals.det_residual = det;
                        best.residuals.trace_residual = trace;
                        return Err(Error::PrecisionExhausted {
                            detail: format!(
                                "residual {worst:.3e} above {tol:.1e} at max_digits = {}",
                                ctx.max_digits()
                            ),
                            best_effort: Some(Box::new(best)),
                        });
                    }
                }
            }
            Err(Error::PrecisionExhausted { detail, .. }) => {
                return Err(Error::PrecisionExhausted {
                    detail,
                    best_effort: None,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// 16 + ceil(log10(e)·(2π/ω)·max|Im λ|) over a 256-point mesh of the loop.
pub fn initial_digits(spec: &LoopSpec) -> u32 {
    let bits = 64;
    let two_pi = Float::with_val(bits, pi(bits) * 2u32);
    let mut worst = 0f64;
    for k in 0..256u32 {
        let th = Float::with_val(bits, &two_pi * k) / 256u32;
        let lam = spec.lambda(&th);
        worst = worst.max(lam.imag().to_f64().abs());
    }
    let spread = std::f64::consts::LOG10_E * spec.period_f64() * worst;
    16 + spread.ceil() as u32
}

fn check_reachable(spec: &LoopSpec, theta_f: &Angle) -> Result<()> {
    let diff = theta_f.minus(&spec.theta_i);
    let d = diff.to_float(128);
    let ok = match spec.direction {
        Direction::Ccw => d >= 0,
        Direction::Cw => d <= 0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "theta_f = {theta_f} is not reachable from theta_i = {} in the {} direction",
            spec.theta_i, spec.direction
        )))
    }
}

/// True when θf − θi is exactly ±2π in the loop's direction.
pub fn is_full_cycle(spec: &LoopSpec, theta_f: &Angle) -> bool {
    theta_f.minus(&spec.theta_i) == Angle::pi_multiple(2 * spec.direction.sign())
}

/// 2cos(2π√(κ² − g0²)/ω).
pub fn trace_target(spec: &LoopSpec, bits: u32) -> Complex {
    let s2 = Rational::from(&spec.kappa * &spec.kappa) - Rational::from(&spec.g0 * &spec.g0);
    let s = Complex::with_val(bits, (Float::with_val(bits, &s2), 0)).sqrt();
    let mut arg = Complex::with_val(bits, &s * Float::with_val(bits, pi(bits) * 2u32));
    arg /= Float::with_val(bits, &spec.omega);
    let mut c = arg.cos();
    c *= 2u32;
    c
}

pub(crate) fn det_trace_residuals(spec: &LoopSpec, theta_f: &Angle, m: &Mat2, ctx: &PrecisionContext) -> (f64, Option<f64>) {
    let mut det = m.det();
    det -= 1u32;
    let det_res = mag(&det);
    let trace = is_full_cycle(spec, theta_f).then(|| {
        let target = trace_target(spec, ctx.bits());
        let d = Complex::with_val(ctx.bits(), m.trace() - &target);
        mag(&d) / mag(&target).max(1.0)
    });
    (det_res, trace)
}

fn mag(z: &Complex) -> f64 {
    if z.is_zero() {
        0.0
    } else {
        10f64.powf(log10_mag(z))
    }
}

/// All residuals of `s` = S(θf, θi) along `spec`; `partner` produces the
/// comparison matrices for other arcs and directions.
pub(crate) fn residuals_with(
    spec: &LoopSpec,
    theta_f: &Angle,
    s: &Mat2,
    ctx: &PrecisionContext,
    partner: &dyn Fn(&LoopSpec, &Angle) -> Result<Mat2>,
) -> Result<SymmetryResiduals> {
    let (det_residual, trace_residual) = det_trace_residuals(spec, theta_f, s, ctx);
    let reversed = spec.direction.reversed();
    // σz P* σz, P from −θi to −θf in the other direction
    let p_spec = spec.clone().with_direction(reversed).with_theta_i(spec.theta_i.negated());
    let p = partner(&p_spec, &theta_f.negated())?;
    let conj_pair = s.relative_distance(&p.conj().sigma_z_sandwich());
    // Q^T, Q from θf to θi in the other direction
    let q_spec = spec.clone().with_direction(reversed).with_theta_i(theta_f.clone());
    let q = partner(&q_spec, &spec.theta_i)?;
    let transpose_pair = s.relative_distance(&q.transpose());
    // σz R† σz, R from −θf to −θi in the same direction
    let r_spec = spec.clone().with_theta_i(theta_f.negated());
    let r = partner(&r_spec, &spec.theta_i.negated())?;
    let dagger = s.relative_distance(&r.dagger().sigma_z_sandwich());

    let on_axis = spec.theta_i.radians_part() == &0 && spec.theta_i.pi_part().is_integer();
    let corollary = (on_axis && is_full_cycle(spec, theta_f)).then(|| {
        let bits = ctx.bits();
        let im = |z: &Complex| {
            let f = Float::with_val(bits, z.imag().abs_ref());
            if f.is_zero() {
                0.0
            } else {
                10f64.powf(crate::precision::log10_float(&f))
            }
        };
        let conj21 = Complex::with_val(bits, s.m[1][0].conj_ref());
        let sum = Complex::with_val(bits, &s.m[0][1] + &conj21);
        let norm = s.frobenius();
        let num = im(&s.m[0][0]) + im(&s.m[1][1]) + mag(&sum);
        if num == 0.0 {
            0.0
        } else {
            num / 10f64.powf(crate::precision::log10_float(&norm))
        }
    });
    Ok(SymmetryResiduals {
        det_residual,
        trace_residual,
        conj_pair_residual: Some(conj_pair),
        transpose_pair_residual: Some(transpose_pair),
        dagger_residual: Some(dagger),
        dagger_corollary_residual: corollary,
    })
}

/// Parameters shared by every evaluation along one loop at one precision.
struct Closed {
    bits: u32,
    omega_s: Float,
    kappa: Float,
    s: Complex,
    p1: Complex,
    p2: Complex,
}

impl Closed {
    fn new(spec: &LoopSpec, bits: u32) -> Self {
        let mut omega_s = Float::with_val(bits, &spec.omega);
        if spec.direction == Direction::Cw {
            omega_s = -omega_s;
        }
        let s2 = Rational::from(&spec.kappa * &spec.kappa) - Rational::from(&spec.g0 * &spec.g0);
        let mut s = if s2 >= 0 {
            Complex::with_val(bits, (Float::with_val(bits, &s2).sqrt(), 0))
        } else {
            Complex::with_val(bits, (0, Float::with_val(bits, -s2).sqrt()))
        };
        if s.imag().is_zero() && omega_s.is_sign_negative() {
            s = -s;
        }
        let mut p1 = Complex::with_val(bits, (&s).clone());
        *p1.mut_imag() += Float::with_val(bits, &spec.g0);
        p1 /= &omega_s;
        let mut p2 = Complex::with_val(bits, &s * Float::with_val(bits, 2u32));
        p2 /= &omega_s;
        p2 += 1u32;
        Self {
            bits,
            omega_s,
            kappa: Float::with_val(bits, &spec.kappa),
            s,
            p1,
            p2,
        }
    }

    /// η at angle θ with its continuous-argument winding number.
    fn eta(&self, spec: &LoopSpec, theta: &Angle) -> (Complex, Float, i64) {
        let bits = self.bits;
        let half_pi = Float::with_val(bits, pi(bits) / 2u32);
        let mut phi = theta.to_float(bits);
        match spec.direction {
            Direction::Ccw => phi -= &half_pi,
            Direction::Cw => phi += &half_pi,
        }
        let r = Float::with_val(bits, Rational::from(&spec.rho * 2u32) / &spec.omega);
        let (sin, cos) = Float::with_val(bits, &phi).sin_cos(Float::new(bits));
        let eta = Complex::with_val(bits, (Float::with_val(bits, &r * &cos), Float::with_val(bits, &r * &sin)));
        let principal = Float::with_val(bits, eta.arg_ref());
        let two_pi = Float::with_val(bits, pi(bits) * 2u32);
        let turns = Float::with_val(bits, &phi - &principal) / &two_pi;
        let winding = turns.to_f64().round() as i64;
        (eta, phi, winding)
    }

    /// M(η) together with the Kummer parameters of F⁰/U⁰.
    fn m(&self, eta: &Complex, winding: i64, ctx: &PrecisionContext) -> Result<(Mat2, KummerParams)> {
        let bits = self.bits;
        let p0 = KummerParams::new(self.p1.clone(), self.p2.clone(), eta.clone()).on_sheet(winding);
        let mut a1 = self.p1.clone();
        a1 += 1u32;
        let mut b1 = self.p2.clone();
        b1 += 1u32;
        let pn = KummerParams::new(a1, b1, eta.clone()).on_sheet(winding);
        let f0 = kummer_f(&p0, ctx)?;
        let f1 = kummer_f(&pn, ctx)?;
        let u0 = kummer_u(&p0, ctx)?;
        let u1 = kummer_u(&pn, ctx)?;
        // −(ω/κ) p1
        let mut c = Complex::with_val(bits, &self.p1 * &self.omega_s);
        c /= &self.kappa;
        c = -c;
        let mut lower_f = Complex::with_val(bits, eta / &self.p2);
        lower_f *= &f1;
        lower_f += &f0;
        lower_f *= &c;
        let mut lower_u = Complex::with_val(bits, eta * &u1);
        lower_u = Complex::with_val(bits, &u0 - &lower_u);
        lower_u *= &c;
        Ok((Mat2::new(f0, u0, lower_f, lower_u), p0))
    }
}

fn raw_transfer(spec: &LoopSpec, theta_f: &Angle, ctx: &PrecisionContext) -> Result<Mat2> {
    if spec.rho == 0 {
        return Ok(constant_h_transfer(spec, theta_f, ctx.bits()));
    }
    Ok(kummer_work_at(spec, theta_f, ctx)?.0)
}

/// Kummer matrices of S(θf, θi) at the precision the escalation settles on.
pub fn kummer_work(spec: &LoopSpec, theta_f: &Angle, ctx: &PrecisionContext) -> Result<KummerWork> {
    if spec.rho == 0 {
        return Err(Error::DegenerateParameter("rho = 0 has no Kummer representation".into()));
    }
    let (_, used) = transfer_escalating(spec, theta_f, ctx)?;
    Ok(kummer_work_at(spec, theta_f, &used)?.1)
}

fn kummer_work_at(spec: &LoopSpec, theta_f: &Angle, ctx: &PrecisionContext) -> Result<(Mat2, KummerWork)> {
    let bits = ctx.bits();
    let cl = Closed::new(spec, bits);
    let (eta_i, phi_i, w_i) = cl.eta(spec, &spec.theta_i);
    let (eta_f, _, w_f) = cl.eta(spec, theta_f);
    let (m_i, params_i) = cl.m(&eta_i, w_i, ctx)?;
    let (m_f, params_f) = cl.m(&eta_f, w_f, ctx)?;
    let mtilde_i = m_i.adjugate();

    // (κ/ω) Γ(p1)/Γ(p2)
    let mut pref = Complex::with_val(bits, gamma_complex(&cl.p1, ctx)?);
    pref /= gamma_complex(&cl.p2, ctx)?;
    pref *= &cl.kappa;
    pref /= &cl.omega_s;
    // η_i^{p2−1} on the continued branch
    let ln_abs = Float::with_val(bits, eta_i.abs_ref()).ln();
    let ln_eta = Complex::with_val(bits, (ln_abs, phi_i));
    let mut pm1 = cl.p2.clone();
    pm1 -= 1u32;
    pref *= Complex::with_val(bits, &pm1 * &ln_eta).exp();
    // e^{i(θf−θi)s/ω − (ηf+ηi)/2}
    let dtheta = theta_f.minus(&spec.theta_i).to_float(bits);
    let mut ex = Complex::with_val(bits, &cl.s * &dtheta);
    ex /= &cl.omega_s;
    ex *= Complex::with_val(bits, (0, 1));
    let mut half_sum = Complex::with_val(bits, &eta_f + &eta_i);
    half_sum /= 2u32;
    ex -= &half_sum;
    pref *= ex.exp();

    let s = m_f.mul(&mtilde_i).scale(&pref);
    Ok((
        s,
        KummerWork {
            m_f,
            mtilde_i,
            params_f,
            params_i,
        },
    ))
}

/// S(θf, θs) for many start angles θs sharing the end θf, reusing M(ηf).
/// `spec.theta_i` is ignored. Escalates until every det residual passes.
pub(crate) fn transfers_to_common_end(
    spec: &LoopSpec,
    theta_f: &Angle,
    starts: &[Angle],
    ctx: &PrecisionContext,
) -> Result<(Vec<Mat2>, PrecisionContext)> {
    spec.validate()?;
    for s in starts {
        check_reachable(&spec.clone().with_theta_i(s.clone()), theta_f)?;
    }
    let tol = ctx.residual_tolerance();
    let start = initial_digits(spec).max(ctx.digits()).min(ctx.max_digits());
    let mut cur = ctx.with_digits(start);
    loop {
        let mats = common_end_at(spec, theta_f, starts, &cur)?;
        let worst = mats
            .iter()
            .map(|m| {
                let mut d = m.det();
                d -= 1u32;
                mag(&d)
            })
            .fold(0.0, f64::max);
        if worst < tol {
            return Ok((mats, cur));
        }
        match cur.doubled() {
            Some(next) => cur = next,
            None => {
                return Err(Error::precision(format!(
                    "det residual {worst:.3e} above {tol:.1e} at max_digits = {}",
                    ctx.max_digits()
                )))
            }
        }
    }
}

fn common_end_at(spec: &LoopSpec, theta_f: &Angle, starts: &[Angle], ctx: &PrecisionContext) -> Result<Vec<Mat2>> {
    let bits = ctx.bits();
    if spec.rho == 0 {
        return Ok(starts
            .iter()
            .map(|s| constant_h_transfer(&spec.clone().with_theta_i(s.clone()), theta_f, bits))
            .collect());
    }
    let cl = Closed::new(spec, bits);
    let (eta_f, _, w_f) = cl.eta(spec, theta_f);
    let (m_f, _) = cl.m(&eta_f, w_f, ctx)?;
    let mut base = Complex::with_val(bits, gamma_complex(&cl.p1, ctx)?);
    base /= gamma_complex(&cl.p2, ctx)?;
    base *= &cl.kappa;
    base /= &cl.omega_s;
    let mut pm1 = cl.p2.clone();
    pm1 -= 1u32;
    let mut out = Vec::with_capacity(starts.len());
    for th in starts {
        let (eta_i, phi_i, w_i) = cl.eta(spec, th);
        let (m_i, _) = cl.m(&eta_i, w_i, ctx)?;
        let mut pref = base.clone();
        let ln_abs = Float::with_val(bits, eta_i.abs_ref()).ln();
        let ln_eta = Complex::with_val(bits, (ln_abs, phi_i));
        pref *= Complex::with_val(bits, &pm1 * &ln_eta).exp();
        let dtheta = theta_f.minus(th).to_float(bits);
        let mut ex = Complex::with_val(bits, &cl.s * &dtheta);
        ex /= &cl.omega_s;
        ex *= Complex::with_val(bits, (0, 1));
        let mut half_sum = Complex::with_val(bits, &eta_f + &eta_i);
        half_sum /= 2u32;
        ex -= &half_sum;
        pref *= ex.exp();
        out.push(m_f.mul(&m_i.adjugate()).scale(&pref));
    }
    Ok(out)
}

/// ρ = 0: H is constant, S = cos(λt) − i sin(λt)/λ H with λ² = κ² − g0².
fn constant_h_transfer(spec: &LoopSpec, theta_f: &Angle, bits: u32) -> Mat2 {
    let mut t = theta_f.minus(&spec.theta_i).to_float(bits);
    t /= Float::with_val(bits, &spec.omega);
    t = t.abs();
    let h = Mat2::new(
        Complex::with_val(bits, (0, Float::with_val(bits, &spec.g0))),
        Complex::with_val(bits, &spec.kappa),
        Complex::with_val(bits, &spec.kappa),
        Complex::with_val(bits, (0, -Float::with_val(bits, &spec.g0))),
    );
    let l2 = Rational::from(&spec.kappa * &spec.kappa) - Rational::from(&spec.g0 * &spec.g0);
    let minus_i = Complex::with_val(bits, (0, -1));
    if l2 == 0 {
        let mut c = minus_i;
        c *= &t;
        let mut out = h.scale(&c);
        out.m[0][0] += 1u32;
        out.m[1][1] += 1u32;
        return out;
    }
    let lam = Complex::with_val(bits, (Float::with_val(bits, &l2), 0)).sqrt();
    let lt = Complex::with_val(bits, &lam * &t);
    let (sin, cos) = lt.sin_cos(Complex::new(bits));
    let mut c = Complex::with_val(bits, &sin / &lam);
    c *= &minus_i;
    let mut out = h.scale(&c);
    out.m[0][0] += &cos;
    out.m[1][1] += &cos;
    out
}

/// Large-ρ closed forms of S12 and S21 for g0 = κ, θi ∈ {0, π} (units of κ).
pub fn asymptotic_offdiag(spec: &LoopSpec, ctx: &PrecisionContext) -> Result<AsymptoticReport> {
    spec.validate()?;
    if spec.g0 != spec.kappa {
        return Err(Error::InvalidInput("asymptotic forms assume g0 = kappa".into()));
    }
    let on_axis = spec.theta_i.radians_part() == &0 && spec.theta_i.pi_part().is_integer();
    if !on_axis {
        return Err(Error::InvalidInput("asymptotic forms assume theta_i = 0 or pi".into()));
    }
    let bits = ctx.bits();
    let rho = Float::with_val(bits, Rational::from(&spec.rho / &spec.kappa));
    let omega = Float::with_val(bits, Rational::from(&spec.omega / &spec.kappa));
    let warning = (rho < 10).then(|| format!("rho/kappa = {} is small for the asymptotic forms", rho.to_f64()));
    if rho == 0 {
        return Err(Error::InvalidInput("rho must be positive".into()));
    }
    // η0 = −2iρ/ω from θi = 0, +2iρ/ω from θi = π; ν = i/ω
    let odd_turn = spec.theta_i.pi_part().numer().is_odd();
    let eta0 = Complex::with_val(bits, (0, Float::with_val(bits, &rho * if odd_turn { 2i32 } else { -2i32 }) / &omega));
    let nu = Complex::with_val(bits, (0, Float::with_val(bits, omega.recip_ref())));
    let two_pi_i_over_omega = Complex::with_val(bits, (0, Float::with_val(bits, pi(bits) * 2u32) / &omega));
    let one = Complex::with_val(bits, 1);

    let neg_eta0 = Complex::with_val(bits, -&eta0);
    let mut t12 = Complex::with_val(bits, Complex::with_val(bits, -&nu) * Complex::with_val(bits, neg_eta0.ln_ref())).exp();
    t12 /= gamma_complex(&Complex::with_val(bits, &one - &nu), ctx)?;
    let mut s12 = Complex::with_val(bits, t12.square_ref());
    s12 *= Complex::with_val(bits, -&eta0).exp();
    s12 *= &two_pi_i_over_omega;
    s12 = -s12;

    let mut t21 = Complex::with_val(bits, &nu * Complex::with_val(bits, eta0.ln_ref())).exp();
    t21 /= gamma_complex(&Complex::with_val(bits, &one + &nu), ctx)?;
    let mut s21 = Complex::with_val(bits, t21.square_ref());
    s21 *= Complex::with_val(bits, eta0.exp_ref());
    s21 *= &two_pi_i_over_omega;
    s21 = -s21;

    let ratio = Complex::with_val(bits, &s21 / &s12);
    let phi = Float::with_val(bits, ratio.arg_ref()).to_f64();
    let (r, w) = (rho.to_f64(), omega.to_f64());
    Ok(AsymptoticReport {
        s12_asym: s12,
        s21_asym: s21,
        phi,
        phi_formula: 4.0 * (1.0 + r + r.ln()) / w - std::f64::consts::PI,
        warning,
    })
}

/// ±√(κ² − g0²), the eigenvalues of the cycle-averaged Hamiltonian.
///
/// The one-cycle matrix is computed as a check: with det S = 1 its
/// eigenvalues are fixed by the trace, which must equal
/// e^{−i2πλ/ω} + e^{i2πλ/ω}.
pub fn floquet_quasienergies(spec: &LoopSpec, ctx: &PrecisionContext) -> Result<(Complex, Complex)> {
    let tm = transfer_one_cycle(spec, ctx)?;
    let tol = ctx.residual_tolerance();
    let tr = tm.residuals.trace_residual.unwrap_or(0.0);
    if tm.residuals.det_residual >= tol || tr >= tol {
        return Err(Error::precision(format!(
            "one-cycle matrix misses its Floquet check: det {:.2e}, trace {:.2e}",
            tm.residuals.det_residual, tr
        )));
    }
    let bits = ctx.bits();
    let s2 = Rational::from(&spec.kappa * &spec.kappa) - Rational::from(&spec.g0 * &spec.g0);
    let lam = Complex::with_val(bits, (Float::with_val(bits, &s2), 0)).sqrt();
    let neg = Complex::with_val(bits, -&lam);
    Ok((lam, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    #[test]
    fn constant_hamiltonian_cycle() {
        let c = ctx(30);
        let spec = LoopSpec::new(1.0, 0.0, 0.0, Angle::zero(), 0.3).unwrap();
        let tm = transfer_one_cycle(&spec, &c).unwrap();
        let t = 2.0 * std::f64::consts::PI / 0.3;
        assert!((tm.s11.real().to_f64() - t.cos()).abs() < 1e-14);
        assert!((tm.s12.imag().to_f64() + t.sin()).abs() < 1e-14);
        assert!(tm.residuals.all_below(c.residual_tolerance()));
    }

    #[test]
    fn zero_length_arc_is_identity() {
        let c = ctx(30);
        let spec = LoopSpec::new(1.0, 1.0, 1.0, Angle::pi_multiple(1), 0.1).unwrap();
        let (m, _) = transfer_escalating(&spec, &Angle::pi_multiple(1), &c).unwrap();
        assert!(m.relative_distance(&Mat2::identity(m.prec())) < 1e-25);
    }

    #[test]
    fn unreachable_final_angle() {
        let c = ctx(30);
        let spec = LoopSpec::new(1.0, 1.0, 1.0, Angle::pi_multiple(1), 0.1).unwrap();
        assert!(transfer_matrix_exact(&spec, &Angle::zero(), &c).is_err());
        let cw = spec.with_direction(Direction::Cw);
        assert!(transfer_matrix_exact(&cw, &Angle::pi_multiple(2), &c).is_err());
    }

    #[test]
    fn initial_digit_estimate_grows_with_period() {
        let a = LoopSpec::unit(1.0, 1.0, Angle::zero(), 5.0).unwrap();
        let b = LoopSpec::unit(1.0, 1.0, Angle::zero(), 20.0).unwrap();
        assert!(initial_digits(&b) > initial_digits(&a));
        let hermitian = LoopSpec::unit(0.0, 0.0, Angle::zero(), 20.0).unwrap();
        assert_eq!(initial_digits(&hermitian), 16);
    }
}
