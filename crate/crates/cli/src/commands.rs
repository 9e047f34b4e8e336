//! Subcommand implementations. Each builds a JSON report; text output is
//! rendered from the same report so the two always agree.

use std::path::Path;

use epchiral::exact::initial_digits;
use epchiral::integrator::max_relative_element_error;
use epchiral::precision::format_float;
use epchiral::sweep::{emit_csv, emit_heatmap_svg, profile_svg, run_sweep_with_progress};
use epchiral::{
    chi_boundary_scan, chirality_ensemble, chirality_exact, condition_boundary, condition_profile, convergence_ladder,
    eigenframe, find_critical_epsilons, nonchirality, rk4_transfer, transfer_matrix_exact, transfer_one_cycle,
    BoundaryScan, ChiralityReport, Error, HpComplex, LabelPolicy, SymmetryResiduals, TransferMatrix,
};
use serde_json::{json, Map, Value};

use crate::config::{Resolved, RunConfig};
use crate::CliError;

pub struct Outcome {
    pub report: Value,
    /// Problems that make the command fail with exit code 1.
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self {
            report,
            violations: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

fn compute(e: Error) -> CliError {
    CliError::Compute(e.to_string())
}

fn complex(z: &HpComplex, digits: usize) -> Value {
    json!({ "re": format_float(z.real(), digits), "im": format_float(z.imag(), digits) })
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

fn residuals(r: &SymmetryResiduals) -> Value {
    json!({
        "det": r.det_residual,
        "trace": opt(r.trace_residual),
        "conj_pair": opt(r.conj_pair_residual),
        "transpose_pair": opt(r.transpose_pair_residual),
        "dagger": opt(r.dagger_residual),
        "dagger_corollary": opt(r.dagger_corollary_residual),
    })
}

fn matrix(tm: &TransferMatrix, digits: usize) -> Value {
    json!({
        "theta_i": tm.theta_i.to_string(),
        "theta_f": tm.theta_f.to_string(),
        "direction": tm.direction.to_string(),
        "digits_used": tm.digits,
        "s11": complex(&tm.s11, digits),
        "s12": complex(&tm.s12, digits),
        "s21": complex(&tm.s21, digits),
        "s22": complex(&tm.s22, digits),
        "residuals": residuals(&tm.residuals),
    })
}

fn residual_violations(label: &str, r: &SymmetryResiduals, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            if !(v < tol) {
                out.push(format!("{label}: {name} residual {v:.3e} exceeds {tol:.1e}"));
            }
        }
    };
    check("det", Some(r.det_residual));
    check("trace", r.trace_residual);
    check("conj_pair", r.conj_pair_residual);
    check("transpose_pair", r.transpose_pair_residual);
    check("dagger", r.dagger_residual);
    check("dagger_corollary", r.dagger_corollary_residual);
    out
}

pub fn exact(r: &Resolved) -> Result<Outcome, CliError> {
    let tm = transfer_one_cycle(&r.spec, &r.ctx).map_err(compute)?;
    let tol = r.ctx.residual_tolerance();
    let mut out = Outcome::ok(json!({
        "command": "exact",
        "tolerance": tol,
        "matrix": matrix(&tm, r.ctx.digits() as usize),
    }));
    out.violations = residual_violations("exact", &tm.residuals, tol);
    Ok(out)
}

pub fn evolve(r: &Resolved) -> Result<Outcome, CliError> {
    let tm = rk4_transfer(&r.spec, &r.ispec, &r.noise, 0).map_err(compute)?;
    let mut out = Outcome::ok(json!({
        "command": "evolve",
        "steps": r.ispec.steps,
        "epsilon": r.noise.epsilon,
        "seed": r.noise.seed,
        "realization": 0,
        "matrix": matrix(&tm, r.ctx.digits() as usize),
    }));
    if let Some(w) = r.ispec.warning() {
        out.warnings.push(w);
    }
    Ok(out)
}

fn chirality_value(c: &ChiralityReport, digits: usize) -> Value {
    let labels = ["ccw_plus", "ccw_minus", "cw_plus", "cw_minus"];
    let mut dec = Map::new();
    for (l, (p, q)) in labels.iter().zip(&c.decompositions) {
        dec.insert((*l).into(), json!({ "p": complex(p, digits), "q": complex(q, digits) }));
    }
    json!({
        "chi_plus": c.chi_plus,
        "chi_minus": c.chi_minus,
        "chi_mean": c.chi_mean,
        "decompositions": dec,
    })
}

pub fn chirality(r: &Resolved, self_test: bool) -> Result<Outcome, CliError> {
    let digits = r.ctx.digits() as usize;
    if self_test {
        // the same matrix for both directions must give χ = 1
        let tm = transfer_one_cycle(&r.spec, &r.ctx).map_err(compute)?;
        let frame = eigenframe(&r.spec, &r.spec.theta_i, &r.ctx, LabelPolicy::PrincipalBranch).map_err(compute)?;
        let c = nonchirality(&tm.matrix(), &tm.matrix(), &frame).map_err(compute)?;
        let mut out = Outcome::ok(json!({ "command": "chirality", "self_test": true, "report": chirality_value(&c, digits) }));
        if (c.chi_mean - 1.0).abs() > 1e-12 {
            out.violations.push(format!("self-test chi_mean = {} instead of 1", c.chi_mean));
        }
        return Ok(out);
    }
    if r.noise.is_clean() {
        let c = chirality_exact(&r.spec, &r.ctx).map_err(compute)?;
        return Ok(Outcome::ok(json!({
            "command": "chirality",
            "mode": "exact",
            "report": chirality_value(&c, digits),
        })));
    }
    let e = chirality_ensemble(&r.spec, &r.ispec, &r.noise, 0).map_err(compute)?;
    let first = epchiral::chirality_integrated(&r.spec, &r.ispec, &r.noise, 0, 0).map_err(compute)?;
    Ok(Outcome::ok(json!({
        "command": "chirality",
        "mode": "integrated",
        "epsilon": r.noise.epsilon,
        "realizations": r.noise.realizations,
        "chi_mean": e.mean,
        "chi_std": e.std,
        "chi_values": e.values,
        "first_realization": chirality_value(&first, digits),
    })))
}

pub fn profile(cfg: &RunConfig, r: &Resolved) -> Result<Outcome, CliError> {
    let p = condition_profile(&r.spec, &r.ctx, cfg.profile.samples).map_err(compute)?;
    let eps = find_critical_epsilons(&p).map_err(compute)?;
    if let Some(path) = &cfg.output.path {
        write_profile(path, &p)?;
    }
    let maxima: Vec<Value> = p.local_maxima.iter().map(|(t, l)| json!({ "t": t, "log10_c": l })).collect();
    Ok(Outcome::ok(json!({
        "command": "profile",
        "direction": p.direction.to_string(),
        "period": p.period,
        "samples": p.times.len(),
        "local_maxima": maxima,
        "t_c": opt(p.t_c),
        "log10_c_tc": opt(p.log10_c_tc),
        "slope_estimate": p.slope_estimate,
        "critical_epsilons": eps,
    })))
}

fn write_profile(path: &Path, p: &epchiral::ConditionProfile) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Compute(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|x| x == "svg") {
        std::fs::write(path, profile_svg(p)).map_err(io)
    } else {
        let mut s = String::from("t,log10_c\n");
        for (t, l) in p.times.iter().zip(&p.log10_values) {
            s.push_str(&format!("{t:.16e},{l:.16e}\n"));
        }
        std::fs::write(path, s).map_err(io)
    }
}

pub fn boundary(cfg: &RunConfig, r: &Resolved) -> Result<Outcome, CliError> {
    let b = cfg
        .boundary
        .as_ref()
        .ok_or_else(|| CliError::Config("boundary: the boundary command needs a [boundary] section".into()))?;
    let grid: Vec<f64> = (0..b.points)
        .map(|k| {
            let x = b.log10_inv_epsilon_min
                + (b.log10_inv_epsilon_max - b.log10_inv_epsilon_min) * k as f64 / (b.points - 1) as f64;
            10f64.powf(-x)
        })
        .collect();
    let scan = BoundaryScan {
        inv_omegas: b.inv_omegas.clone(),
        epsilon_grid: grid,
        threshold: b.threshold,
        bisections: b.bisections,
    };
    let chi = chi_boundary_scan(&r.spec, &scan, &r.ispec, &r.noise).map_err(compute)?;
    let predicted = if b.predict {
        Some(condition_boundary(&r.spec, &b.inv_omegas, &r.ctx, cfg.profile.samples).map_err(compute)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut csv = String::from("inv_omega,epsilon_c,status,epsilon_c_predicted\n");
    for (k, p) in chi.points.iter().enumerate() {
        let pred = predicted.as_ref().and_then(|c| c.points[k].epsilon_c);
        rows.push(json!({
            "inv_omega": p.inv_omega,
            "epsilon_c": opt(p.epsilon_c),
            "status": p.status,
            "epsilon_c_predicted": opt(pred),
        }));
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        csv.push_str(&format!("{:.16e},{},{},{}\n", p.inv_omega, f(p.epsilon_c), p.status, f(pred)));
    }
    if let Some(path) = &cfg.output.path {
        std::fs::write(path, csv).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    }
    let fit = |f: Option<epchiral::LinearFit>| {
        f.map_or(Value::Null, |f| json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared }))
    };
    let mut out = Outcome::ok(json!({
        "command": "boundary",
        "threshold": b.threshold,
        "points": rows,
        "fit": fit(chi.fit),
        "predicted_fit": fit(predicted.and_then(|p| p.fit)),
    }));
    let missing = chi.points.iter().filter(|p| p.epsilon_c.is_none()).count();
    if missing > 0 {
        out.warnings.push(format!("{missing} of {} points have no crossing", chi.points.len()));
    }
    Ok(out)
}

pub fn sweep(cfg: &RunConfig, r: &Resolved, workers: usize, strict: bool) -> Result<Outcome, CliError> {
    let (plan, scfg) = cfg.sweep_plan(r)?;
    let step = ((plan.shape().0 * plan.shape().1) / 20).max(1);
    let progress = move |done: usize, total: usize| {
        if done % step == 0 || done == total {
            eprintln!("sweep: {done}/{total} cells");
        }
    };
    let result = run_sweep_with_progress(&plan, workers, Some(&progress)).map_err(compute)?;
    let io = |p: &Path, e: Error| CliError::Compute(format!("{}: {e}", p.display()));
    if let Some(path) = &cfg.output.path {
        emit_csv(&result, path).map_err(|e| io(path, e))?;
    }
    if let Some(path) = &scfg.svg {
        emit_heatmap_svg(&result, path, scfg.colormap, None).map_err(|e| io(path, e))?;
    }
    let failed = result.failed_cells();
    let finite: Vec<f64> = result.values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut out = Outcome::ok(json!({
        "command": "sweep",
        "cells": result.values.len(),
        "failed_cells": failed,
        "min": if finite.is_empty() { Value::Null } else { json!(lo) },
        "max": if finite.is_empty() { Value::Null } else { json!(hi) },
        "wall_time_s": result.wall_time_s,
        "engine": result.engine_version,
    }));
    if failed > 0 {
        let msg = format!("{failed} cells failed");
        if strict {
            out.violations.push(msg);
        } else {
            out.warnings.push(msg);
        }
    }
    Ok(out)
}

pub fn validate(cfg: &RunConfig, r: &Resolved) -> Result<Outcome, CliError> {
    let digits = r.ctx.digits() as usize;
    let tol = r.ctx.residual_tolerance();
    let theta_f = r.spec.theta_one_cycle();
    let mut violations = Vec::new();
    let mut report = Map::new();
    report.insert("command".into(), json!("validate"));
    report.insert("tolerance".into(), json!(tol));
    report.insert("initial_digits".into(), json!(initial_digits(&r.spec)));
    let exact = match transfer_matrix_exact(&r.spec, &theta_f, &r.ctx) {
        Ok(tm) => {
            violations.extend(residual_violations("exact", &tm.residuals, tol));
            report.insert("exact".into(), matrix(&tm, digits));
            Some(tm)
        }
        Err(Error::PrecisionExhausted { detail, best_effort }) => {
            violations.push(format!("exact: precision exhausted ({detail})"));
            if let Some(tm) = best_effort {
                violations.extend(residual_violations("exact", &tm.residuals, tol));
                report.insert("exact".into(), matrix(&tm, digits));
            }
            None
        }
        Err(e) => return Err(compute(e)),
    };
    let v = &cfg.validate;
    if v.integrator {
        let clean = epchiral::NoiseSpec::clean();
        match rk4_transfer(&r.spec, &r.ispec, &clean, 0) {
            Ok(tm) => {
                violations.extend(residual_violations("integrator", &tm.residuals, v.integrator_tolerance));
                let mut m = matrix(&tm, digits);
                m["log10_max_entry"] = json!(tm.matrix().log10_max_entry());
                if let Some(ex) = &exact {
                    let err = max_relative_element_error(&tm.matrix(), &ex.matrix());
                    m["relative_error_vs_exact"] = json!(err);
                    if !(err < v.integrator_tolerance) {
                        violations.push(format!(
                            "integrator: relative error {err:.3e} vs exact exceeds {:.1e}",
                            v.integrator_tolerance
                        ));
                    }
                }
                report.insert("integrator".into(), m);
            }
            Err(Error::Overflow { log10_norm }) => {
                violations.push(format!("integrator: overflow, |S| ~ 1e{log10_norm:.0}"));
            }
            Err(e) => return Err(compute(e)),
        }
    }
    if !v.ladder_steps.is_empty() {
        // rungs are measured against a converged reference regardless of the escalation switch
        let exact_ctx = r.ispec.ctx.with_digits(r.ctx.digits().max(initial_digits(&r.spec)));
        let rungs = convergence_ladder(&r.spec, &r.ispec.ctx, &exact_ctx, &v.ladder_steps).map_err(compute)?;
        if rungs.iter().any(|g| g.non_decreasing) {
            violations.push("ladder: error did not decrease with more steps".into());
        }
        report.insert("ladder".into(), serde_json::to_value(&rungs).map_err(|e| CliError::Compute(e.to_string()))?);
    }
    report.insert("passed".into(), json!(violations.is_empty()));
    report.insert("violations".into(), json!(violations));
    Ok(Outcome {
        report: Value::Object(report),
        violations,
        warnings: Vec::new(),
    })
}

/// Flattened `path = value` lines.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    flatten("", v, &mut out);
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Array(a) => {
            let items: Vec<String> = a.iter().map(scalar).collect();
            out.push_str(&format!("{prefix} = [{}]\n", items.join(", ")));
        }
        _ => out.push_str(&format!("{prefix} = {}\n", scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "n/a".into(),
        other => other.to_string(),
    }
}
