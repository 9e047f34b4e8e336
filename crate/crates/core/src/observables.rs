//! Quantities derived from transfer matrices: relative transition
//! probabilities, the non-chirality degree, condition-number profiles and
//! the speed-noise critical boundary.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{transfer_escalating, transfers_to_common_end};
use crate::integrator::{integrate_cycle, IntegrationSpec, NoiseSpec};
use crate::linalg::{dot, Mat2};
use crate::model::{eigenframe, eigenframe_at, Angle, Direction, EigenFrame, LabelPolicy, LoopSpec, StateVector};
use crate::precision::{log10_float, rational_from_f64, PrecisionContext};

/// P[β][α] with index 0 for + and 1 for −.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub p: [[f64; 2]; 2],
    /// P_{+−} − P_{−+}.
    pub asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiralityReport {
    pub chi_plus: f64,
    pub chi_minus: f64,
    pub chi_mean: f64,
    /// (p, q) of the end states, ordered (CCW, +), (CCW, −), (CW, +), (CW, −).
    pub decompositions: [(Complex, Complex); 4],
}

/// Mean and spread of χ_c over noise realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleChirality {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionProfile {
    pub direction: Direction,
    pub period: f64,
    pub times: Vec<f64>,
    /// C(t), saturating to infinity beyond the f64 range.
    pub values: Vec<f64>,
    pub log10_values: Vec<f64>,
    /// Interior local maxima as (t, log10 C), refined by golden-section search.
    pub local_maxima: Vec<(f64, f64)>,
    pub t_c: Option<f64>,
    pub log10_c_tc: Option<f64>,
    /// |∫ Im λ dθ| over the last ωt_c of the loop, so that ln C(t_c) ≈ slope/ω.
    pub slope_estimate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryMethod {
    ChiCrossing { threshold: f64 },
    ConditionPrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub inv_omega: f64,
    pub epsilon_c: Option<f64>,
    /// "ok" or "no_crossing" / an error code.
    pub status: String,
    /// χ_c at each grid ε, in grid order.
    pub scan: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalBoundary {
    pub points: Vec<BoundaryPoint>,
    pub method: BoundaryMethod,
    /// log10(1/ε_c) against 1/ω.
    pub fit: Option<LinearFit>,
}

/// Settings of a χ_c = threshold boundary scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScan {
    pub inv_omegas: Vec<f64>,
    /// Log-spaced ε grid, any order.
    pub epsilon_grid: Vec<f64>,
    pub threshold: f64,
    pub bisections: u32,
}

fn norm2(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.norm_ref())
}

fn ratio_f64(num: &Float, den: &Float) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let r = Float::with_val(num.prec().max(den.prec()), num / den);
    r.to_f64()
}

/// [S]_{βα} = ⟨L_β(f)|S|R_α(i)⟩ and the column-normalized probabilities.
pub fn transition_probabilities(s: &Mat2, frame_i: &EigenFrame, frame_f: &EigenFrame) -> Result<TransitionReport> {
    let mut p = [[0.0; 2]; 2];
    for (a, r) in [&frame_i.r_plus, &frame_i.r_minus].into_iter().enumerate() {
        let col = s.apply(&r.as_array());
        let amp: Vec<Float> = [&frame_f.l_plus, &frame_f.l_minus]
            .into_iter()
            .map(|l| norm2(&dot(&l.as_array(), &col)))
            .collect();
        let total = Float::with_val(amp[0].prec(), &amp[0] + &amp[1]);
        if total.is_zero() || !total.is_finite() {
            return Err(Error::DegenerateFrame("projected amplitudes vanish".into()));
        }
        for b in 0..2 {
            p[b][a] = ratio_f64(&amp[b], &total);
        }
    }
    Ok(TransitionReport {
        asymmetry: p[0][1] - p[1][0],
        p,
    })
}

/// Transition asymmetry P(θi ± θ, θi) along the loop; `offsets` are the
/// travelled angles θ ≥ 0. Samples whose frame hits the EP tolerance are
/// `None`. Labels are carried continuously from the principal frame at θi.
pub fn transition_asymmetry_trace(
    spec: &LoopSpec,
    ctx: &PrecisionContext,
    offsets: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let frame_i = eigenframe(spec, &spec.theta_i, ctx, LabelPolicy::PrincipalBranch)?;
    let sign = spec.direction.sign() as f64;
    let mut prior = frame_i.clone();
    let mut last = 0.0f64;
    let mut out = Vec::with_capacity(offsets.len());
    for &theta in offsets {
        if theta < 0.0 {
            return Err(Error::InvalidInput("trace offsets must be >= 0".into()));
        }
        // thread the labels through a fine sub-mesh
        let sub = (((theta - last).abs() / 0.01).ceil() as usize).max(1);
        let mut ep_hit = false;
        for k in 1..=sub {
            let off = last + (theta - last) * k as f64 / sub as f64;
            let th = Float::with_val(ctx.bits(), spec.theta_i.to_float(ctx.bits()) + sign * off);
            match eigenframe_at(spec, &th, ctx, LabelPolicy::ContinuedFrom(&prior)) {
                Ok(f) => prior = f,
                Err(Error::EpDegeneracy { .. }) => ep_hit = k == sub,
                Err(e) => return Err(e),
            }
        }
        last = theta;
        if ep_hit {
            out.push((theta, None));
            continue;
        }
        let target = spec.theta_i.plus(&Angle::radians(rational_from_f64(sign * theta)?));
        let (s, _) = transfer_escalating(spec, &target, ctx)?;
        let rep = transition_probabilities(&s, &frame_i, &prior)?;
        out.push((theta, Some(rep.asymmetry)));
    }
    Ok(out)
}

/// χ_c^± from the two one-cycle matrices and the frame at θi.
pub fn nonchirality(s_ccw: &Mat2, s_cw: &Mat2, frame_i: &EigenFrame) -> Result<ChiralityReport> {
    let decompose = |s: &Mat2, r: &StateVector| -> Result<(Complex, Complex)> {
        let psi = s.apply(&r.as_array());
        let p = dot(&frame_i.l_plus.as_array(), &psi);
        let q = dot(&frame_i.l_minus.as_array(), &psi);
        if p.is_zero() && q.is_zero() {
            return Err(Error::ZeroState);
        }
        Ok((p, q))
    };
    let chi = |a: &(Complex, Complex), b: &(Complex, Complex)| -> f64 {
        let bits = a.0.prec().0;
        let mut inner = Complex::with_val(bits, a.0.conj_ref()) * &b.0;
        inner += Complex::with_val(bits, a.1.conj_ref()) * &b.1;
        let na = Float::with_val(bits, norm2(&a.0) + norm2(&a.1));
        let nb = Float::with_val(bits, norm2(&b.0) + norm2(&b.1));
        let den = Float::with_val(bits, &na * &nb);
        ratio_f64(&norm2(&inner), &den).clamp(0.0, 1.0)
    };
    let cp = decompose(s_ccw, &frame_i.r_plus)?;
    let cm = decompose(s_ccw, &frame_i.r_minus)?;
    let wp = decompose(s_cw, &frame_i.r_plus)?;
    let wm = decompose(s_cw, &frame_i.r_minus)?;
    let chi_plus = chi(&cp, &wp);
    let chi_minus = chi(&cm, &wm);
    Ok(ChiralityReport {
        chi_plus,
        chi_minus,
        chi_mean: 0.5 * (chi_plus + chi_minus),
        decompositions: [cp, cm, wp, wm],
    })
}

/// χ_c from the exact one-cycle matrices in both directions.
pub fn chirality_exact(spec: &LoopSpec, ctx: &PrecisionContext) -> Result<ChiralityReport> {
    let ccw = spec.clone().with_direction(Direction::Ccw);
    let cw = spec.clone().with_direction(Direction::Cw);
    let (s_ccw, used_a) = transfer_escalating(&ccw, &ccw.theta_one_cycle(), ctx)?;
    let (s_cw, used_b) = transfer_escalating(&cw, &cw.theta_one_cycle(), ctx)?;
    let fctx = if used_a.digits() >= used_b.digits() { used_a } else { used_b };
    let frame = eigenframe(spec, &spec.theta_i, &fctx, LabelPolicy::PrincipalBranch)?;
    nonchirality(&s_ccw, &s_cw, &frame)
}

/// Digits for a noisy run: enough that roundoff, amplified by the loop's
/// exponential growth, stays below the injected noise.
pub fn noisy_run_digits(spec: &LoopSpec, noise: &NoiseSpec, ctx: &PrecisionContext) -> u32 {
    let below_noise = if noise.epsilon > 0.0 {
        (-noise.epsilon.log10()).max(0.0).ceil() as u32
    } else {
        0
    };
    (crate::exact::initial_digits(spec) + below_noise)
        .max(ctx.digits())
        .min(ctx.max_digits())
}

/// χ_c for realization `r` of grid cell `cell`, integrating both directions.
pub fn chirality_integrated(
    spec: &LoopSpec,
    ispec: &IntegrationSpec,
    noise: &NoiseSpec,
    realization: u32,
    cell: u64,
) -> Result<ChiralityReport> {
    let digits = noisy_run_digits(spec, noise, &ispec.ctx);
    let run = IntegrationSpec {
        steps: ispec.steps,
        ctx: ispec.ctx.with_digits(digits),
    };
    let ccw = spec.clone().with_direction(Direction::Ccw);
    let cw = spec.clone().with_direction(Direction::Cw);
    let s_ccw = integrate_cycle(&ccw, &run, noise, realization, cell)?;
    let s_cw = integrate_cycle(&cw, &run, noise, realization, cell)?;
    let frame = eigenframe(spec, &spec.theta_i, &run.ctx, LabelPolicy::PrincipalBranch)?;
    nonchirality(&s_ccw, &s_cw, &frame)
}

/// χ_c over all realizations of `noise` (exact when ε = 0).
pub fn chirality_ensemble(
    spec: &LoopSpec,
    ispec: &IntegrationSpec,
    noise: &NoiseSpec,
    cell: u64,
) -> Result<EnsembleChirality> {
    noise.validate()?;
    let values = if noise.is_clean() {
        vec![chirality_exact(spec, &ispec.ctx)?.chi_mean]
    } else {
        (0..noise.realizations)
            .map(|r| chirality_integrated(spec, ispec, noise, r, cell).map(|c| c.chi_mean))
            .collect::<Result<Vec<_>>>()?
    };
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleChirality { values, mean, std })
}

/// Cond[A] = σ_max/σ_min = λ_max(A†A)/|det A|.
pub fn condition_number_2x2(a: &Mat2, ctx: &PrecisionContext) -> Result<Float> {
    let bits = a.prec().max(ctx.bits());
    let n = |z: &Complex| Float::with_val(bits, z.norm_ref());
    let p = Float::with_val(bits, n(&a.m[0][0]) + n(&a.m[1][0]));
    let q = Float::with_val(bits, n(&a.m[0][1]) + n(&a.m[1][1]));
    // off-diagonal of A†A
    let mut b = Complex::with_val(bits, a.m[0][0].conj_ref()) * &a.m[0][1];
    b += Complex::with_val(bits, a.m[1][0].conj_ref()) * &a.m[1][1];
    let half_sum = Float::with_val(bits, &p + &q) / 2u32;
    let half_diff = Float::with_val(bits, &p - &q) / 2u32;
    let disc = Float::with_val(bits, half_diff.square_ref()) + n(&b);
    let lmax = Float::with_val(bits, &half_sum + disc.sqrt());
    if lmax.is_zero() {
        return Err(Error::SingularMatrix);
    }
    let det = Float::with_val(bits, a.det().abs_ref());
    // λ_min/λ_max = |det|²/λ_max² < 10^-2D  ⇔  |det| < 10^-D λ_max
    let thresh = Float::with_val(bits, &lmax) * Float::with_val(bits, 10f64).pow(-(ctx.digits() as i32));
    if det <= thresh {
        return Err(Error::SingularMatrix);
    }
    Ok(Float::with_val(bits, &lmax / &det))
}

/// Number of golden-section iterations when refining maxima and minima.
const REFINE_ITERATIONS: u32 = 12;
const RETURN_TOLERANCE: f64 = 1e-3;

/// C(t) = Cond[S(θf, θf ∓ ωt)] on `n_samples` uniform times over [0, T].
pub fn condition_profile(spec: &LoopSpec, ctx: &PrecisionContext, n_samples: usize) -> Result<ConditionProfile> {
    if n_samples < 64 {
        return Err(Error::InvalidInput(format!("n_samples must be >= 64, got {n_samples}")));
    }
    let period = spec.period_f64();
    let theta_f = spec.theta_one_cycle();
    let sign = spec.direction.sign();
    let denom = (n_samples - 1) as i64;
    let starts: Vec<Angle> = (0..n_samples as i64)
        .map(|k| theta_f.minus(&Angle::pi_multiple(rug::Rational::from((2 * k * sign as i64, denom)))))
        .collect();
    let times: Vec<f64> = (0..n_samples).map(|k| period * k as f64 / denom as f64).collect();
    let log10_values = log10_conditions(spec, &theta_f, &starts, ctx)?;
    let values = log10_values.iter().map(|l| 10f64.powf(*l)).collect();

    let eval = |t: f64| -> Result<f64> {
        let start = start_angle(spec, &theta_f, t)?;
        Ok(log10_conditions(spec, &theta_f, &[start], ctx)?[0])
    };
    let mut local_maxima = Vec::new();
    for i in 1..n_samples - 1 {
        let (l, c, r) = (log10_values[i - 1], log10_values[i], log10_values[i + 1]);
        if c > l && c >= r {
            let (t, v) = golden_section(&eval, times[i - 1], times[i + 1], (times[i], c), true)?;
            local_maxima.push((t, v));
        }
    }
    let mut profile = ConditionProfile {
        direction: spec.direction,
        period,
        times,
        values,
        log10_values,
        local_maxima,
        t_c: None,
        log10_c_tc: None,
        slope_estimate: 0.0,
    };
    let accepted = conjecture_maxima(&profile, &eval)?;
    // no boundary-generating maximum: the first interior maximum, else the largest value
    let pick = accepted
        .first()
        .or_else(|| profile.local_maxima.first())
        .copied()
        .or_else(|| {
            profile
                .times
                .iter()
                .copied()
                .zip(profile.log10_values.iter().copied())
                .max_by(|a, b| a.1.total_cmp(&b.1))
        });
    if let Some((t, v)) = pick {
        profile.t_c = Some(t);
        profile.log10_c_tc = Some(v);
        profile.slope_estimate = imaginary_phase(spec, &theta_f, t * spec.omega.to_f64(), ctx);
    }
    Ok(profile)
}

fn start_angle(spec: &LoopSpec, theta_f: &Angle, t: f64) -> Result<Angle> {
    let travelled = rational_from_f64(t * spec.omega.to_f64())?;
    let step = Angle::radians(travelled);
    Ok(match spec.direction {
        Direction::Ccw => theta_f.minus(&step),
        Direction::Cw => theta_f.plus(&step),
    })
}

fn log10_conditions(spec: &LoopSpec, theta_f: &Angle, starts: &[Angle], ctx: &PrecisionContext) -> Result<Vec<f64>> {
    let (mats, used) = transfers_to_common_end(spec, theta_f, starts, ctx)?;
    mats.par_iter()
        .map(|m| condition_number_2x2(m, &used).map(|c| log10_float(&c).max(0.0)))
        .collect()
}

/// Golden-section search on [a, b] for a maximum (or minimum) of `f`,
/// seeded with a known interior sample.
fn golden_section(
    f: &dyn Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    seed: (f64, f64),
    maximize: bool,
) -> Result<(f64, f64)> {
    let sgn = if maximize { 1.0 } else { -1.0 };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = seed;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..REFINE_ITERATIONS {
        for (x, v) in [(x1, f1), (x2, f2)] {
            if sgn * v > sgn * best.1 {
                best = (x, v);
            }
        }
        if sgn * f1 >= sgn * f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if sgn * v > sgn * best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// The conjecture's selection: repeatedly take the largest interior maximum
/// left of the previously examined one and keep it if C returns to ≈ 1
/// between it and that previous maximum (or T).
fn conjecture_maxima(profile: &ConditionProfile, eval: &dyn Fn(f64) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    let limit = (1.0 + RETURN_TOLERANCE).log10();
    let mut upper = profile.period;
    let mut accepted = Vec::new();
    loop {
        let next = profile
            .local_maxima
            .iter()
            .filter(|(t, _)| *t < upper)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .copied();
        let Some((tc, vc)) = next else { break };
        if returns_to_one(profile, eval, tc, upper, limit)? {
            accepted.push((tc, vc));
        }
        upper = tc;
    }
    accepted.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(accepted)
}

fn returns_to_one(
    profile: &ConditionProfile,
    eval: &dyn Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    limit: f64,
) -> Result<bool> {
    let inside: Vec<usize> = (0..profile.times.len())
        .filter(|&i| profile.times[i] > lo && profile.times[i] < hi)
        .collect();
    let Some(&imin) = inside.iter().min_by(|&&a, &&b| profile.log10_values[a].total_cmp(&profile.log10_values[b])) else {
        return Ok(false);
    };
    let vmin = profile.log10_values[imin];
    if vmin <= limit {
        return Ok(true);
    }
    // a narrow dip may fall between samples: refine near-misses
    if vmin > 0.1 {
        return Ok(false);
    }
    let dt = profile.times[1] - profile.times[0];
    let a = (profile.times[imin] - dt).max(lo);
    let b = (profile.times[imin] + dt).min(hi);
    let (_, v) = golden_section(eval, a, b, (profile.times[imin], vmin), false)?;
    Ok(v <= limit)
}

/// ε_c = 1/C(t_c) for every maximum the conjecture accepts, descending;
/// a profile without such a maximum yields the single value 1/max C.
pub fn find_critical_epsilons(profile: &ConditionProfile) -> Result<Vec<f64>> {
    if profile.times.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let no_refine = |_: f64| -> Result<f64> { Ok(f64::INFINITY) };
    let mut eps: Vec<f64> = conjecture_maxima(profile, &no_refine)?
        .into_iter()
        .map(|(_, v)| 10f64.powf(-v))
        .collect();
    if eps.is_empty() {
        let max = profile
            .log10_values
            .iter()
            .chain(profile.local_maxima.iter().map(|(_, v)| v))
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        eps.push(10f64.powf(-max));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    Ok(eps)
}

/// |∫ Im λ dθ| over the final `span` radians of the loop, following one
/// eigenvalue branch continuously (Simpson's rule).
fn imaginary_phase(spec: &LoopSpec, theta_f: &Angle, span: f64, ctx: &PrecisionContext) -> f64 {
    let bits = 64.max(ctx.bits().min(128));
    let n = 2 * ((span / 0.005).ceil() as usize).max(8);
    let end = theta_f.to_float(bits);
    let sign = spec.direction.sign() as f64;
    let mut prev: Option<Complex> = None;
    let mut acc = 0.0;
    for k in 0..=n {
        let off = span * k as f64 / n as f64;
        let th = Float::with_val(bits, &end - sign * (span - off));
        let mut lam = spec.lambda(&th);
        if let Some(p) = &prev {
            let d_same = Float::with_val(bits, Complex::with_val(bits, &lam - p).abs_ref());
            let d_flip = Float::with_val(bits, Complex::with_val(bits, &lam + p).abs_ref());
            if d_flip < d_same {
                lam = -lam;
            }
        }
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * lam.imag().to_f64();
        prev = Some(lam);
    }
    (acc * span / (3.0 * n as f64)).abs()
}

/// K(t1) = ‖S(θf, θ1) σz S(θ1, θi)‖_F on a mesh of times in [0, T].
pub fn sensitivity_kernel(spec: &LoopSpec, ctx: &PrecisionContext, t1_mesh: &[f64]) -> Result<Vec<(f64, f64)>> {
    let period = spec.period_f64();
    let theta_f = spec.theta_one_cycle();
    t1_mesh
        .iter()
        .map(|&t1| {
            if !(0.0..=period * (1.0 + 1e-12)).contains(&t1) {
                return Err(Error::InvalidInput(format!("t1 = {t1} outside [0, T]")));
            }
            let theta_1 = if t1 == 0.0 {
                spec.theta_i.clone()
            } else if (t1 - period).abs() <= 1e-12 * period {
                theta_f.clone()
            } else {
                let step = Angle::radians(rational_from_f64(t1 * spec.omega.to_f64())?);
                match spec.direction {
                    Direction::Ccw => spec.theta_i.plus(&step),
                    Direction::Cw => spec.theta_i.minus(&step),
                }
            };
            let (first, _) = transfer_escalating(spec, &theta_1, ctx)?;
            let rest = spec.clone().with_theta_i(theta_1);
            let (second, _) = transfer_escalating(&rest, &theta_f, ctx)?;
            let k = second.mul(&Mat2::sigma_z(first.prec()).mul(&first)).frobenius();
            Ok((t1, 10f64.powf(log10_float(&k))))
        })
        .collect()
}

/// Boundary predicted by ε_c·C(t_c) = 1, using for each 1/ω the smaller
/// C(t_c) of the two directions.
pub fn condition_boundary(family: &LoopSpec, inv_omegas: &[f64], ctx: &PrecisionContext, n_samples: usize) -> Result<CriticalBoundary> {
    let points = inv_omegas
        .iter()
        .map(|&inv| -> Result<BoundaryPoint> {
            let spec = family.clone().with_inv_omega(rational_from_f64(inv)?)?;
            let mut best = f64::INFINITY;
            for d in [Direction::Ccw, Direction::Cw] {
                let p = condition_profile(&spec.clone().with_direction(d), ctx, n_samples)?;
                best = best.min(p.log10_c_tc.unwrap_or(0.0));
            }
            Ok(BoundaryPoint {
                inv_omega: inv,
                epsilon_c: Some(10f64.powf(-best)),
                status: "ok".into(),
                scan: vec![],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.epsilon_c.map(|e| (p.inv_omega, -e.log10())))
        .unzip();
    Ok(CriticalBoundary {
        fit: linear_fit(&xs, &ys),
        points,
        method: BoundaryMethod::ConditionPrediction,
    })
}

/// log10(1/ε_c) against 1/ω by least squares.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// For each 1/ω, locate the ε where the ensemble-mean χ_c crosses the
/// threshold: coarse scan over the grid, take the crossing closest to the
/// largest ε, then bisect in log ε.
pub fn chi_boundary_scan(
    family: &LoopSpec,
    scan: &BoundaryScan,
    ispec: &IntegrationSpec,
    noise_base: &NoiseSpec,
) -> Result<CriticalBoundary> {
    if scan.epsilon_grid.len() < 2 || scan.epsilon_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidInput("epsilon grid needs >= 2 positive values".into()));
    }
    let mut grid = scan.epsilon_grid.clone();
    grid.sort_by(|a, b| b.total_cmp(a));
    let points: Vec<BoundaryPoint> = scan
        .inv_omegas
        .par_iter()
        .enumerate()
        .map(|(i, &inv)| boundary_point(family, scan, &grid, ispec, noise_base, i as u64, inv))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.epsilon_c.map(|e| (p.inv_omega, -e.log10())))
        .unzip();
    Ok(CriticalBoundary {
        fit: linear_fit(&xs, &ys),
        points,
        method: BoundaryMethod::ChiCrossing {
            threshold: scan.threshold,
        },
    })
}

fn boundary_point(
    family: &LoopSpec,
    scan: &BoundaryScan,
    grid_desc: &[f64],
    ispec: &IntegrationSpec,
    noise_base: &NoiseSpec,
    index: u64,
    inv_omega: f64,
) -> BoundaryPoint {
    let fail = |status: String, scan_vals: Vec<f64>| BoundaryPoint {
        inv_omega,
        epsilon_c: None,
        status,
        scan: scan_vals,
    };
    let spec = match rational_from_f64(inv_omega).and_then(|q| family.clone().with_inv_omega(q)) {
        Ok(s) => s,
        Err(e) => return fail(e.code().into(), vec![]),
    };
    let chi_at = |eps: f64, cell: u64| -> Result<f64> {
        let noise = NoiseSpec { epsilon: eps, ..*noise_base };
        Ok(chirality_ensemble(&spec, ispec, &noise, cell)?.mean)
    };
    // cells: one per (ω index, evaluation), so every ε sample has its own streams
    let cell = |k: u64| (index << 16) | k;
    let mut values = Vec::with_capacity(grid_desc.len());
    for (k, &e) in grid_desc.iter().enumerate() {
        match chi_at(e, cell(k as u64)) {
            Ok(v) => values.push(v),
            Err(err) => return fail(err.code().into(), values),
        }
    }
    let above = |v: f64| v >= scan.threshold;
    let Some(k) = (0..values.len() - 1).find(|&k| above(values[k]) != above(values[k + 1])) else {
        return fail("no_crossing".into(), values);
    };
    let (mut hi, mut lo) = (grid_desc[k].ln(), grid_desc[k + 1].ln());
    let hi_above = above(values[k]);
    for j in 0..scan.bisections {
        let mid = 0.5 * (hi + lo);
        match chi_at(mid.exp(), cell(grid_desc.len() as u64 + j as u64)) {
            Ok(v) => {
                if above(v) == hi_above {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Err(err) => return fail(err.code().into(), values),
        }
    }
    BoundaryPoint {
        inv_omega,
        epsilon_c: Some((0.5 * (hi + lo)).exp()),
        status: "ok".into(),
        scan: values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        Complex::with_val(256, (re, im))
    }

    #[test]
    fn condition_number_examples() {
        let cx = ctx(50);
        let id = Mat2::identity(cx.bits());
        assert_eq!(condition_number_2x2(&id, &cx).unwrap(), 1);
        let d = Mat2::new(c(10.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0));
        let k = condition_number_2x2(&d, &cx).unwrap().to_f64();
        assert!((k - 100.0).abs() < 1e-10);
        let sing = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        assert!(matches!(condition_number_2x2(&sing, &cx), Err(Error::SingularMatrix)));
    }

    #[test]
    fn identical_matrices_are_non_chiral() {
        let cx = ctx(30);
        let spec = LoopSpec::new(1.0, 1.0, 1.0, Angle::pi_multiple(1), 0.2).unwrap();
        let frame = eigenframe(&spec, &spec.theta_i, &cx, LabelPolicy::PrincipalBranch).unwrap();
        let s = Mat2::new(c(1.0, 0.5), c(0.3, -2.0), c(0.7, 0.1), c(-1.0, 0.0));
        let r = nonchirality(&s, &s, &frame).unwrap();
        assert!((r.chi_mean - 1.0).abs() < 1e-14);
        // a global rescaling of one end state changes nothing
        let scaled = s.scale(&c(0.0, 3.0));
        let r2 = nonchirality(&s, &scaled, &frame).unwrap();
        assert!((r2.chi_mean - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_transition_report() {
        let cx = ctx(30);
        let spec = LoopSpec::new(1.0, 1.0, 1.0, Angle::zero(), 0.2).unwrap();
        let frame = eigenframe(&spec, &spec.theta_i, &cx, LabelPolicy::PrincipalBranch).unwrap();
        let rep = transition_probabilities(&Mat2::identity(cx.bits()), &frame, &frame).unwrap();
        assert!((rep.p[0][0] - 1.0).abs() < 1e-15 && (rep.p[1][1] - 1.0).abs() < 1e-15);
        assert!(rep.asymmetry.abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conjecture_on_synthetic_profile() {
        // two bumps separated by a return to C = 1, then a larger bump
        let times: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let log10_values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let b1 = 2.0 * (-(t - 20.0f64).powi(2) / 20.0).exp();
                let b2 = 5.0 * (-(t - 70.0f64).powi(2) / 20.0).exp();
                b1 + b2
            })
            .collect();
        let mut local_maxima = Vec::new();
        for i in 1..100 {
            if log10_values[i] > log10_values[i - 1] && log10_values[i] >= log10_values[i + 1] {
                local_maxima.push((times[i], log10_values[i]));
            }
        }
        let profile = ConditionProfile {
            direction: Direction::Ccw,
            period: 100.0,
            values: log10_values.iter().map(|l| 10f64.powf(*l)).collect(),
            times,
            log10_values,
            local_maxima,
            t_c: None,
            log10_c_tc: None,
            slope_estimate: 0.0,
        };
        let eps = find_critical_epsilons(&profile).unwrap();
        assert_eq!(eps.len(), 2);
        assert!((eps[0] - 1e-2).abs() < 1e-6);
        assert!((eps[1] - 1e-5).abs() < 1e-9);
    }
}
