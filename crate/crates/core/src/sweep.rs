//! Parameter grids over loop, speed and noise settings, with CSV and SVG
//! output.
//!
//! Every cell is evaluated independently. Noise for cell k is drawn from
//! the substreams `(direction, realization, k)` under the plan's master
//! seed, so the grid does not depend on how cells are scheduled.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::transfer_escalating;
use crate::integrator::{integrate_cycle, IntegrationSpec, NoiseSpec};
use crate::model::{eigenframe, Angle, LabelPolicy, LoopSpec};
use crate::observables::{chirality_ensemble, condition_profile, transition_probabilities, ConditionProfile};
use crate::precision::rational_from_f64;

pub const ENGINE_VERSION: &str = concat!("epchiral ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    InvOmega,
    /// θ_i in units of π.
    ThetaI,
    Rho,
    Log10InvEpsilon,
    G0,
}

impl AxisKind {
    pub fn name(self) -> &'static str {
        match self {
            AxisKind::InvOmega => "inv_omega",
            AxisKind::ThetaI => "theta_i_over_pi",
            AxisKind::Rho => "rho",
            AxisKind::Log10InvEpsilon => "log10_inv_epsilon",
            AxisKind::G0 => "g0",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub kind: AxisKind,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|k| self.min + (self.max - self.min) * k as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    ChiMean,
    /// One-cycle P_{+−} − P_{−+} in the loop's own direction.
    Asymmetry,
    /// log10 C(t_c) of the condition profile in the loop's own direction.
    LogCondition,
}

fn default_profile_samples() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub axes: Vec<Axis>,
    pub template: LoopSpec,
    pub noise: NoiseSpec,
    pub integration: IntegrationSpec,
    pub quantity: Quantity,
    pub master_seed: u64,
    #[serde(default = "default_profile_samples")]
    pub profile_samples: usize,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidInput(format!("a sweep needs 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].kind == self.axes[1].kind {
            return Err(Error::InvalidInput("sweep axes must differ".into()));
        }
        for a in &self.axes {
            if !(a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::InvalidInput(format!("axis {} has a non-finite range", a.kind.name())));
            }
            // a single-point axis is allowed as a degenerate sweep
            if a.n == 0 || (a.n > 1 && a.min == a.max) {
                return Err(Error::InvalidInput(format!("axis {} is degenerate", a.kind.name())));
            }
        }
        if self.quantity == Quantity::LogCondition && self.profile_samples < 64 {
            return Err(Error::InvalidInput("profile_samples must be >= 64".into()));
        }
        self.template.validate()?;
        self.noise.validate()?;
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].n, self.axes.get(1).map_or(1, |a| a.n))
    }

    /// Loop and noise for one grid point.
    pub fn cell_setup(&self, coords: &[f64]) -> Result<(LoopSpec, NoiseSpec)> {
        let mut spec = self.template.clone();
        let mut noise = NoiseSpec {
            seed: self.master_seed,
            ..self.noise
        };
        for (axis, &v) in self.axes.iter().zip(coords) {
            match axis.kind {
                AxisKind::InvOmega => spec = spec.with_inv_omega(rational_from_f64(v)?)?,
                AxisKind::ThetaI => spec = spec.with_theta_i(Angle::pi_times(v)?),
                AxisKind::Rho => spec.rho = rational_from_f64(v)?,
                AxisKind::G0 => spec.g0 = rational_from_f64(v)?,
                AxisKind::Log10InvEpsilon => noise.epsilon = 10f64.powf(-v),
            }
        }
        spec.validate()?;
        noise.validate()?;
        Ok((spec, noise))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    /// Row-major over (axis 1, axis 2); NaN where the cell failed.
    pub values: Vec<f64>,
    /// "ok" or the error code of the failed cell.
    pub status: Vec<String>,
    pub engine_version: String,
    pub wall_time_s: f64,
}

impl SweepResult {
    pub fn shape(&self) -> (usize, usize) {
        self.plan.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape().1 + j]
    }

    pub fn failed_cells(&self) -> usize {
        self.status.iter().filter(|s| *s != "ok").count()
    }

    /// Values and status agree bit for bit (timing is ignored).
    pub fn same_grid(&self, other: &SweepResult) -> bool {
        self.plan == other.plan
            && self.status == other.status
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Evaluates one cell; `cell` selects its noise substreams.
pub fn evaluate_cell(plan: &SweepPlan, coords: &[f64], cell: u64) -> Result<f64> {
    let (spec, noise) = plan.cell_setup(coords)?;
    match plan.quantity {
        Quantity::ChiMean => Ok(chirality_ensemble(&spec, &plan.integration, &noise, cell)?.mean),
        Quantity::Asymmetry => asymmetry_cell(&spec, &plan.integration, &noise, cell),
        Quantity::LogCondition => {
            let p = condition_profile(&spec, &plan.integration.ctx, plan.profile_samples)?;
            p.log10_c_tc.ok_or(Error::EmptyProfile)
        }
    }
}

fn asymmetry_cell(spec: &LoopSpec, ispec: &IntegrationSpec, noise: &NoiseSpec, cell: u64) -> Result<f64> {
    let ctx = &ispec.ctx;
    let frame = eigenframe(spec, &spec.theta_i, ctx, LabelPolicy::PrincipalBranch)?;
    if noise.is_clean() {
        let (s, _) = transfer_escalating(spec, &spec.theta_one_cycle(), ctx)?;
        return Ok(transition_probabilities(&s, &frame, &frame)?.asymmetry);
    }
    let run = IntegrationSpec {
        steps: ispec.steps,
        ctx: ctx.with_digits(crate::observables::noisy_run_digits(spec, noise, ctx)),
    };
    let mut total = 0.0;
    for r in 0..noise.realizations {
        let s = integrate_cycle(spec, &run, noise, r, cell)?;
        total += transition_probabilities(&s, &frame, &frame)?.asymmetry;
    }
    Ok(total / noise.realizations as f64)
}

/// Progress callback: (cells done, cells total).
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

pub fn run_sweep(plan: &SweepPlan, worker_budget: usize) -> Result<SweepResult> {
    run_sweep_with_progress(plan, worker_budget, None)
}

pub fn run_sweep_with_progress(plan: &SweepPlan, worker_budget: usize, progress: Option<Progress>) -> Result<SweepResult> {
    plan.validate()?;
    if worker_budget == 0 {
        return Err(Error::InvalidInput("worker budget must be positive".into()));
    }
    let (n1, n2) = plan.shape();
    let a1 = plan.axes[0].values();
    let a2 = plan.axes.get(1).map(|a| a.values());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_budget)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let done = AtomicUsize::new(0);
    let total = n1 * n2;
    let cells: Vec<(f64, String)> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n2, k % n2);
                let mut coords = vec![a1[i]];
                if let Some(a2) = &a2 {
                    coords.push(a2[j]);
                }
                let out = match evaluate_cell(plan, &coords, k as u64) {
                    Ok(v) if v.is_finite() => (v, "ok".to_string()),
                    Ok(_) => (f64::NAN, "non_finite".to_string()),
                    Err(e) => (f64::NAN, e.code().to_string()),
                };
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(p) = progress {
                    p(n, total);
                }
                out
            })
            .collect()
    });
    let (values, status) = cells.into_iter().unzip();
    Ok(SweepResult {
        plan: plan.clone(),
        values,
        status,
        engine_version: ENGINE_VERSION.to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

const PLAN_PREFIX: &str = "# plan: ";
const ENGINE_PREFIX: &str = "# engine: ";

/// Long-format CSV, one row per cell. The plan is embedded as a JSON
/// comment line so the file alone reproduces the run; wall time is left
/// out so reruns produce identical files.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(result, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv(result: &SweepResult, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{ENGINE_PREFIX}{}", result.engine_version)?;
    writeln!(out, "{PLAN_PREFIX}{}", serde_json::to_string(&result.plan)?)?;
    let plan = &result.plan;
    let name2 = plan.axes.get(1).map_or("axis2", |a| a.kind.name());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([plan.axes[0].kind.name(), name2, "value", "status"])?;
    let (n1, n2) = plan.shape();
    let a1 = plan.axes[0].values();
    let a2 = plan.axes.get(1).map(|a| a.values());
    for i in 0..n1 {
        for j in 0..n2 {
            let k = i * n2 + j;
            let x2 = a2.as_ref().map_or(String::new(), |a| format!("{:.16e}", a[j]));
            let v = result.values[k];
            let value = if v.is_nan() { String::new() } else { format!("{v:.16e}") };
            w.write_record([format!("{:.16e}", a1[i]), x2, value, result.status[k].clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<SweepResult> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut engine = String::new();
    let mut plan: Option<SweepPlan> = None;
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(rest) = line.strip_prefix(ENGINE_PREFIX) {
            engine = rest.trim_end().to_string();
        } else if let Some(rest) = line.strip_prefix(PLAN_PREFIX) {
            plan = Some(serde_json::from_str(rest.trim_end())?);
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let plan = plan.ok_or_else(|| Error::InvalidInput("CSV has no plan comment".into()))?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut values = Vec::new();
    let mut status = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = rec.get(2).unwrap_or("");
        values.push(if v.is_empty() {
            f64::NAN
        } else {
            v.parse().map_err(|_| Error::InvalidInput(format!("bad value {v:?}")))?
        });
        status.push(rec.get(3).unwrap_or("").to_string());
    }
    let (n1, n2) = plan.shape();
    if values.len() != n1 * n2 {
        return Err(Error::InvalidInput(format!("expected {} rows, found {}", n1 * n2, values.len())));
    }
    Ok(SweepResult {
        plan,
        values,
        status,
        engine_version: engine,
        wall_time_s: f64::NAN,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    Viridis,
    Magma,
}

// nine evenly spaced samples of each map
const VIRIDIS: [[u8; 3]; 9] = [
    [0x44, 0x01, 0x54],
    [0x47, 0x2d, 0x7b],
    [0x3b, 0x52, 0x8b],
    [0x2c, 0x72, 0x8e],
    [0x21, 0x91, 0x8c],
    [0x28, 0xae, 0x80],
    [0x5e, 0xc9, 0x62],
    [0xad, 0xdc, 0x30],
    [0xfd, 0xe7, 0x25],
];
const MAGMA: [[u8; 3]; 9] = [
    [0x00, 0x00, 0x04],
    [0x1c, 0x10, 0x44],
    [0x4f, 0x12, 0x7b],
    [0x81, 0x25, 0x81],
    [0xb5, 0x36, 0x7a],
    [0xe5, 0x50, 0x64],
    [0xfb, 0x87, 0x61],
    [0xfe, 0xc2, 0x87],
    [0xfc, 0xfd, 0xbf],
];

impl Colormap {
    /// RGB at x ∈ [0, 1] (clamped).
    pub fn rgb(self, x: f64) -> [u8; 3] {
        let table = match self {
            Colormap::Viridis => &VIRIDIS,
            Colormap::Magma => &MAGMA,
        };
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        let pos = x * (table.len() - 1) as f64;
        let k = (pos.floor() as usize).min(table.len() - 2);
        let f = pos - k as f64;
        let mut out = [0u8; 3];
        for c in 0..3 {
            let v = table[k][c] as f64 * (1.0 - f) + table[k + 1][c] as f64 * f;
            out[c] = v.round() as u8;
        }
        out
    }

    pub fn hex(self, x: f64) -> String {
        let [r, g, b] = self.rgb(x);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 360.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 30.0;

fn range_of(values: &[f64], quantity: Quantity) -> (f64, f64) {
    if quantity == Quantity::ChiMean {
        return (0.0, 1.0);
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axis_span(axis: Option<&Axis>) -> (f64, f64) {
    match axis {
        Some(a) if a.n > 1 => {
            let half = 0.5 * (a.max - a.min) / (a.n - 1) as f64;
            (a.min - half, a.max + half)
        }
        Some(a) => (a.min - 0.5, a.min + 0.5),
        None => (0.0, 1.0),
    }
}

/// Heatmap with axis 1 horizontal and axis 2 vertical. `overlay` draws a
/// polyline in data coordinates (e.g. a predicted boundary).
pub fn emit_heatmap_svg(result: &SweepResult, path: &Path, colormap: Colormap, overlay: Option<&[(f64, f64)]>) -> Result<()> {
    std::fs::write(path, heatmap_svg(result, colormap, overlay))?;
    Ok(())
}

pub fn heatmap_svg(result: &SweepResult, colormap: Colormap, overlay: Option<&[(f64, f64)]>) -> String {
    let plan = &result.plan;
    let (n1, n2) = plan.shape();
    let (lo, hi) = range_of(&result.values, plan.quantity);
    let (x0, x1) = axis_span(plan.axes.first());
    let (y0, y1) = axis_span(plan.axes.get(1));
    let cw = PLOT_W / n1 as f64;
    let ch = PLOT_H / n2 as f64;
    let width = LEFT + PLOT_W + 120.0;
    let height = TOP + PLOT_H + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str(
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#888888" stroke-width="2"/></pattern></defs>"##,
    );
    s.push('\n');
    for i in 0..n1 {
        for j in 0..n2 {
            let v = result.get(i, j);
            let fill = if v.is_finite() {
                colormap.hex((v - lo) / (hi - lo))
            } else {
                "url(#hatch)".to_string()
            };
            let x = LEFT + i as f64 * cw;
            // axis 2 grows upward
            let y = TOP + PLOT_H - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                cw + 0.01,
                ch + 0.01
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    if let Some(points) = overlay {
        let map = |(x, y): (f64, f64)| {
            (
                LEFT + (x - x0) / (x1 - x0) * PLOT_W,
                TOP + PLOT_H - (y - y0) / (y1 - y0) * PLOT_H,
            )
        };
        let pts: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2" stroke-dasharray="6,4"/>"#,
            pts.join(" ")
        );
    }
    // ticks at the ends and middle of each axis
    for k in 0..3 {
        let f = k as f64 / 2.0;
        let xv = x0 + f * (x1 - x0);
        let x = LEFT + f * PLOT_W;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + PLOT_H + 16.0,
            tick(xv)
        );
        if plan.axes.len() == 2 {
            let yv = y0 + f * (y1 - y0);
            let y = TOP + PLOT_H - f * PLOT_H;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick(yv)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP + PLOT_H + 40.0,
        plan.axes[0].kind.name()
    );
    if let Some(a) = plan.axes.get(1) {
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            TOP + PLOT_H / 2.0,
            TOP + PLOT_H / 2.0,
            a.kind.name()
        );
    }
    colorbar(&mut s, colormap, lo, hi, LEFT + PLOT_W + 30.0);
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn colorbar(s: &mut String, colormap: Colormap, lo: f64, hi: f64, x: f64) {
    let _ = writeln!(s, r#"<defs><linearGradient id="cbar" x1="0" y1="1" x2="0" y2="0">"#);
    for k in 0..=16 {
        let f = k as f64 / 16.0;
        let _ = writeln!(s, r#"<stop offset="{f:.4}" stop-color="{}"/>"#, colormap.hex(f));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r#"<rect x="{x}" y="{TOP}" width="20" height="{PLOT_H}" fill="url(#cbar)" stroke="black"/>"#
    );
    for (f, v) in [(0.0, lo), (0.5, 0.5 * (lo + hi)), (1.0, hi)] {
        let y = TOP + PLOT_H - f * PLOT_H;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 26.0, y + 4.0, tick(v));
    }
}

/// Line chart of log10 C(t) with the local maxima and t_c marked.
pub fn profile_svg(profile: &ConditionProfile) -> String {
    let (t0, t1) = (0.0, profile.period);
    let ymax = profile
        .log10_values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let map = |t: f64, y: f64| (LEFT + (t - t0) / (t1 - t0) * PLOT_W, TOP + PLOT_H - y / ymax * PLOT_H);
    let width = LEFT + PLOT_W + 30.0;
    let height = TOP + PLOT_H + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let pts: Vec<String> = profile
        .times
        .iter()
        .zip(&profile.log10_values)
        .filter(|(_, v)| v.is_finite())
        .map(|(&t, &v)| {
            let (x, y) = map(t, v);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#21918c" stroke-width="1.5"/>"##,
        pts.join(" ")
    );
    for &(t, v) in &profile.local_maxima {
        let (x, y) = map(t, v);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="#b5367a"/>"##);
    }
    if let Some(tc) = profile.t_c {
        let (x, _) = map(tc, 0.0);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{TOP}" x2="{x:.3}" y2="{:.3}" stroke="blue" stroke-dasharray="2,3"/>"#,
            TOP + PLOT_H
        );
    }
    for k in 0..3 {
        let f = k as f64 / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + f * PLOT_W,
            TOP + PLOT_H + 16.0,
            tick(f * t1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + PLOT_H - f * PLOT_H + 4.0,
            tick(f * ymax)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t ({})</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP + PLOT_H + 40.0,
        profile.direction
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">log10 C(t)</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::PrecisionContext;

    fn plan(axes: Vec<Axis>) -> SweepPlan {
        SweepPlan {
            axes,
            template: LoopSpec::unit(1.0, 1.0, Angle::zero(), 5.0).unwrap(),
            noise: NoiseSpec::clean(),
            integration: IntegrationSpec::new(200, PrecisionContext::new(30).unwrap()).unwrap(),
            quantity: Quantity::ChiMean,
            master_seed: 1,
            profile_samples: 64,
        }
    }

    fn ramp(n1: usize, n2: usize) -> SweepResult {
        let p = plan(vec![
            Axis { kind: AxisKind::Rho, min: 0.5, max: 1.5, n: n1 },
            Axis { kind: AxisKind::InvOmega, min: 2.0, max: 4.0, n: n2 },
        ]);
        let values: Vec<f64> = (0..n1 * n2).map(|k| k as f64 / (n1 * n2) as f64).collect();
        SweepResult {
            status: vec!["ok".into(); values.len()],
            values,
            plan: p,
            engine_version: ENGINE_VERSION.into(),
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn axis_values_hit_both_ends() {
        let a = Axis { kind: AxisKind::Rho, min: 1.0, max: 2.0, n: 5 };
        assert_eq!(a.values(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn invalid_plans() {
        assert!(plan(vec![]).validate().is_err());
        let a = Axis { kind: AxisKind::Rho, min: 1.0, max: 1.0, n: 3 };
        assert!(plan(vec![a]).validate().is_err());
        let b = Axis { kind: AxisKind::Rho, min: 1.0, max: 2.0, n: 3 };
        assert!(plan(vec![b, b]).validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = ramp(2, 2);
        r.values[3] = f64::NAN;
        r.status[3] = "overflow".into();
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# engine: "));
        assert!(lines[1].starts_with("# plan: {"));
        assert_eq!(lines[2], "rho,inv_omega,value,status");
        assert_eq!(lines.len(), 3 + 4);
        assert!(lines[6].ends_with(",,overflow"));
    }

    #[test]
    fn colormaps_are_monotone_in_lightness() {
        for cm in [Colormap::Viridis, Colormap::Magma] {
            let lum = |x: f64| {
                let [r, g, b] = cm.rgb(x);
                0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
            };
            let samples: Vec<f64> = (0..=20).map(|k| lum(k as f64 / 20.0)).collect();
            assert!(samples.windows(2).all(|w| w[1] >= w[0]), "{cm:?}");
        }
    }

    #[test]
    fn heatmap_marks_failed_cells() {
        let mut r = ramp(3, 2);
        r.values[1] = f64::NAN;
        let svg = heatmap_svg(&r, Colormap::Viridis, Some(&[(0.5, 2.0), (1.5, 4.0)]));
        assert_eq!(svg.matches("url(#hatch)").count(), 1);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("linearGradient"));
    }
}
