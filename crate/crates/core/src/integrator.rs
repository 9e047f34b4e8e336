//! Fixed-step RK4 propagation of i dY/dt = H̃(t) Y over one cycle, with
//! H̃ = H + εξ(t)σ_z.
//!
//! The white noise ξ is frozen within each step at w/√dt, w a standard
//! normal draw, so that the discrete correlation is δ_jk/dt. Holding ξ fixed
//! across the RK4 stages makes the scheme converge to the Stratonovich
//! reading of the noisy equation.
//!
//! The arithmetic runs at exactly the context's requested digits, without
//! guard digits: the precision of the stepping is itself the experimental
//! knob here, and a 16-digit run is meant to behave like double precision.

use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{det_trace_residuals, residuals_with, transfer_matrix_exact, Provenance, TransferMatrix};
use crate::linalg::Mat2;
use crate::model::{Angle, Direction, LoopSpec};
use crate::precision::{digits_to_bits, pi, PrecisionContext};
use crate::rng::{gaussian_stream, SubstreamId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
    pub realizations: u32,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            seed: 0,
            realizations: 1,
        }
    }
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64, realizations: u32) -> Result<Self> {
        let n = Self {
            epsilon,
            seed,
            realizations,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn clean() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidInput("realizations must be positive".into()));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.epsilon == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub steps: u64,
    pub ctx: PrecisionContext,
}

impl IntegrationSpec {
    pub const MIN_STEPS: u64 = 4;
    pub const ADVISED_STEPS: u64 = 100;

    pub fn new(steps: u64, ctx: PrecisionContext) -> Result<Self> {
        if steps < Self::MIN_STEPS {
            return Err(Error::InvalidInput(format!("steps must be >= {}, got {steps}", Self::MIN_STEPS)));
        }
        Ok(Self { steps, ctx })
    }

    pub fn warning(&self) -> Option<String> {
        (self.steps < Self::ADVISED_STEPS)
            .then(|| format!("{} steps per cycle is coarse; results may be far from converged", self.steps))
    }
}

/// One-cycle propagator for realization `realization_index` of grid cell 0.
pub fn rk4_transfer(
    spec: &LoopSpec,
    ispec: &IntegrationSpec,
    noise: &NoiseSpec,
    realization_index: u32,
) -> Result<TransferMatrix> {
    rk4_transfer_in_cell(spec, ispec, noise, realization_index, 0)
}

/// As [`rk4_transfer`], drawing noise from the substream of `cell`.
pub fn rk4_transfer_in_cell(
    spec: &LoopSpec,
    ispec: &IntegrationSpec,
    noise: &NoiseSpec,
    realization_index: u32,
    cell: u64,
) -> Result<TransferMatrix> {
    noise.validate()?;
    if realization_index >= noise.realizations {
        return Err(Error::InvalidInput(format!(
            "realization {realization_index} out of range (realizations = {})",
            noise.realizations
        )));
    }
    let ctx = &ispec.ctx;
    let m = integrate_cycle(spec, ispec, noise, realization_index, cell)?;
    let theta_f = spec.theta_one_cycle();
    let mut tm = TransferMatrix::from_matrix(
        m,
        spec.theta_i.clone(),
        theta_f.clone(),
        spec.direction,
        Provenance::Integrated {
            steps: ispec.steps,
            epsilon: noise.epsilon,
            seed: noise.seed,
        },
        ctx.digits(),
    );
    if noise.is_clean() {
        let clean = NoiseSpec::clean();
        tm.residuals = residuals_with(spec, &theta_f, &tm.matrix(), ctx, &|sp, _| {
            integrate_cycle(sp, ispec, &clean, 0, 0)
        })?;
    } else {
        let (det, _) = det_trace_residuals(spec, &theta_f, &tm.matrix(), ctx);
        tm.residuals.det_residual = det;
    }
    Ok(tm)
}

/// Classical RK4 on the 2×2 propagator, dt = T/steps.
pub(crate) fn integrate_cycle(
    spec: &LoopSpec,
    ispec: &IntegrationSpec,
    noise: &NoiseSpec,
    realization: u32,
    cell: u64,
) -> Result<Mat2> {
    spec.validate()?;
    let ctx = &ispec.ctx;
    let bits = digits_to_bits(ctx.digits());
    let steps = ispec.steps;
    let dt = Float::with_val(bits, spec.period(bits) / steps);
    let half_dt = Float::with_val(bits, &dt / 2u32);
    let sixth_dt = Float::with_val(bits, &dt / 6u32);
    let kappa = Complex::with_val(bits, &spec.kappa);
    let g0 = Float::with_val(bits, &spec.g0);
    let rho = Float::with_val(bits, &spec.rho);
    let theta_i = spec.theta_i.to_float(bits);
    // angle advance per half step, signed by direction
    let mut dtheta = Float::with_val(bits, pi(bits) / steps);
    if spec.direction == Direction::Cw {
        dtheta = -dtheta;
    }
    let mut draws = (!noise.is_clean()).then(|| {
        gaussian_stream(
            noise.seed,
            SubstreamId::new(spec.direction, realization as u64, cell),
        )
    });
    let noise_scale = Float::with_val(bits, noise.epsilon) / Float::with_val(bits, dt.sqrt_ref());
    let limit = ctx.max_digits() as f64 / 2.0;

    // h(θ) = i(g0 − ρe^{iθ}) = ρ sin θ + i(g0 − ρ cos θ)
    let h_at = |half_steps: u64, xi: &Float| -> Complex {
        let th = Float::with_val(bits, &dtheta * half_steps) + &theta_i;
        let (sin, cos) = th.sin_cos(Float::new(bits));
        let mut re = Float::with_val(bits, &rho * &sin);
        re += xi;
        let im = Float::with_val(bits, &g0 - Float::with_val(bits, &rho * &cos));
        Complex::with_val(bits, (re, im))
    };
    // −i H Y for H = [[h, κ], [κ, −h]]
    let deriv = |h: &Complex, y: &Mat2| -> Mat2 {
        let col = |j: usize| {
            let mut top = Complex::with_val(bits, h * &y.m[0][j]);
            top += Complex::with_val(bits, &kappa * &y.m[1][j]);
            let mut bot = Complex::with_val(bits, &kappa * &y.m[0][j]);
            bot -= Complex::with_val(bits, h * &y.m[1][j]);
            // multiply by −i: (x + iy)(−i) = y − ix
            let rot = |z: Complex| {
                let (re, im) = z.into_real_imag();
                Complex::with_val(bits, (im, -re))
            };
            (rot(top), rot(bot))
        };
        let (a0, b0) = col(0);
        let (a1, b1) = col(1);
        Mat2::new(a0, a1, b0, b1)
    };
    let axpy = |y: &Mat2, k: &Mat2, s: &Float| -> Mat2 {
        let e = |i: usize, j: usize| {
            let mut z = Complex::with_val(bits, &k.m[i][j] * s);
            z += &y.m[i][j];
            z
        };
        Mat2::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
    };

    let mut y = Mat2::identity(bits);
    let mut h_start = None;
    for n in 0..steps {
        let xi = match draws.as_mut() {
            Some(stream) => {
                let w = stream.next().expect("gaussian stream is endless");
                Float::with_val(bits, &noise_scale * Float::with_val(bits, w))
            }
            None => Float::new(bits),
        };
        let h0 = match h_start.take() {
            Some(h) if draws.is_none() => h,
            _ => h_at(2 * n, &xi),
        };
        let h_mid = h_at(2 * n + 1, &xi);
        let h1 = h_at(2 * n + 2, &xi);
        let k1 = deriv(&h0, &y);
        let k2 = deriv(&h_mid, &axpy(&y, &k1, &half_dt));
        let k3 = deriv(&h_mid, &axpy(&y, &k2, &half_dt));
        let k4 = deriv(&h1, &axpy(&y, &k3, &dt));
        let mut sum = k2.clone();
        for row in 0..2 {
            for c in 0..2 {
                sum.m[row][c] += &k3.m[row][c];
                sum.m[row][c] *= 2u32;
                sum.m[row][c] += &k1.m[row][c];
                sum.m[row][c] += &k4.m[row][c];
            }
        }
        y = axpy(&y, &sum, &sixth_dt);
        if n % 64 == 63 || n + 1 == steps {
            let l = y.log10_max_entry();
            if !y.is_finite() || l > limit {
                return Err(Error::Overflow { log10_norm: l });
            }
        }
        h_start = Some(h1);
    }
    Ok(y)
}

/// One rung of a step-doubling study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub steps: u64,
    /// max_ij |S_num − S_exact|_ij / max_ij |S_exact|_ij.
    pub rel_error: f64,
    /// Error ratio to the previous rung (previous / this).
    pub ratio: Option<f64>,
    /// Set when the error did not decrease from the previous rung.
    pub non_decreasing: bool,
}

/// Noise-free RK4 errors against the exact one-cycle matrix.
///
/// The exact reference is computed with `exact_ctx`, the integration with
/// `ctx`, so a low-precision rung can be measured against a converged answer.
pub fn convergence_ladder(
    spec: &LoopSpec,
    ctx: &PrecisionContext,
    exact_ctx: &PrecisionContext,
    steps_list: &[u64],
) -> Result<Vec<LadderRung>> {
    let exact = transfer_matrix_exact(spec, &spec.theta_one_cycle(), exact_ctx)?.matrix();
    let mut out: Vec<LadderRung> = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        let ispec = IntegrationSpec::new(steps, *ctx)?;
        let rel_error = match integrate_cycle(spec, &ispec, &NoiseSpec::clean(), 0, 0) {
            Ok(m) => max_relative_element_error(&m, &exact),
            Err(Error::Overflow { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let prev = out.last().map(|r| r.rel_error);
        out.push(LadderRung {
            steps,
            rel_error,
            ratio: prev.map(|p| p / rel_error),
            non_decreasing: prev.is_some_and(|p| !(rel_error < p)),
        });
    }
    Ok(out)
}

pub fn max_relative_element_error(approx: &Mat2, exact: &Mat2) -> f64 {
    let diff = approx.sub(&exact.at_prec(approx.prec().max(exact.prec())));
    let num = diff.log10_max_entry();
    let den = exact.log10_max_entry();
    if num == f64::NEG_INFINITY {
        return 0.0;
    }
    10f64.powf(num - den)
}

/// Convenience for callers that hold only an angle: the integrator always
/// runs a full cycle, so this checks the request is one.
pub fn check_full_cycle(spec: &LoopSpec, theta_f: &Angle) -> Result<()> {
    if crate::exact::is_full_cycle(spec, theta_f) {
        Ok(())
    } else {
        Err(Error::InvalidInput("the integrator propagates whole cycles only".into()))
    }
}
