use std::f64::consts::LOG10_E;

use epchiral::{
    chi_boundary_scan, chirality_ensemble, chirality_exact, condition_boundary, condition_profile, eigenframe,
    find_critical_epsilons, nonchirality, rk4_transfer, sensitivity_kernel, transfer_one_cycle,
    transition_asymmetry_trace, transition_probabilities, Angle, BoundaryScan, Direction, IntegrationSpec, LabelPolicy,
    LoopSpec, NoiseSpec, PrecisionContext,
};

fn ctx(d: u32) -> PrecisionContext {
    PrecisionContext::new(d).unwrap()
}

#[test]
fn chiral_background_at_symmetric_start() {
    let spec = LoopSpec::unit(1.0, 1.0, Angle::zero(), 5.0).unwrap();
    let c = chirality_exact(&spec, &ctx(30)).unwrap();
    assert!(c.chi_mean < 0.05, "{}", c.chi_mean);
}

#[test]
fn chirality_oscillates_with_speed_for_large_loops() {
    // ρ = 3 from θi = 0: chiral near 1/ω ≈ 3.8, non-chiral near 5.7
    let c = ctx(30);
    let at = |inv: f64| chirality_exact(&LoopSpec::unit(1.0, 3.0, Angle::zero(), inv).unwrap(), &c).unwrap().chi_mean;
    assert!(at(3.8) < 0.1);
    assert!(at(5.7) > 0.9);
}

#[test]
fn loop_b_is_non_chiral() {
    let spec = LoopSpec::loop_b(0.8, Angle::zero(), 10.0).unwrap();
    let c = chirality_exact(&spec, &ctx(30)).unwrap();
    assert!((c.chi_mean - 1.0).abs() < 1e-6);
}

#[test]
fn noise_makes_broken_phase_start_non_chiral() {
    let spec = LoopSpec::unit(1.0, 1.0, Angle::pi_multiple(1), 4.0).unwrap();
    let ispec = IntegrationSpec::new(800, ctx(30)).unwrap();
    let e = chirality_ensemble(&spec, &ispec, &NoiseSpec::new(1e-4, 1, 2).unwrap(), 0).unwrap();
    assert!(e.mean > 0.9, "{:?}", e);
}

#[test]
fn transition_probabilities_after_one_cycle() {
    let c = ctx(30);
    let spec = LoopSpec::unit(1.0, 1.0, Angle::zero(), 5.0).unwrap();
    let s = transfer_one_cycle(&spec, &c).unwrap().matrix();
    let f = eigenframe(&spec, &spec.theta_i, &c, LabelPolicy::PrincipalBranch).unwrap();
    let t = transition_probabilities(&s, &f, &f).unwrap();
    for col in 0..2 {
        assert!((t.p[0][col] + t.p[1][col] - 1.0).abs() < 1e-12);
    }
    // symmetric-phase start with ρ < 2: one eigenvector dominates
    assert!(t.asymmetry.abs() > 0.9, "{}", t.asymmetry);
}

#[test]
fn asymmetry_trace_is_bounded() {
    let spec = LoopSpec::unit(1.0, 3.0, Angle::pi_multiple(1), 5.0).unwrap();
    let offsets: Vec<f64> = (1..=16).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
    let trace = transition_asymmetry_trace(&spec, &ctx(30), &offsets).unwrap();
    assert_eq!(trace.len(), offsets.len());
    for (_, p) in trace {
        if let Some(p) = p {
            assert!((-1.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn swapping_labels_swaps_chi_plus_and_minus() {
    let c = ctx(30);
    let spec = LoopSpec::unit(1.0, 2.0, Angle::pi_times(0.75).unwrap(), 3.0).unwrap();
    let a = transfer_one_cycle(&spec, &c).unwrap().matrix();
    let b = transfer_one_cycle(&spec.clone().with_direction(Direction::Cw), &c).unwrap().matrix();
    let f = eigenframe(&spec, &spec.theta_i, &c, LabelPolicy::PrincipalBranch).unwrap();
    let x = nonchirality(&a, &b, &f).unwrap();
    let y = nonchirality(&a, &b, &f.swapped()).unwrap();
    assert!((x.chi_plus - y.chi_minus).abs() < 1e-12);
    assert!((x.chi_mean - y.chi_mean).abs() < 1e-12);
}

#[test]
fn noisy_chirality_is_reproducible() {
    let spec = LoopSpec::unit(1.0, 3.0, Angle::pi_multiple(1), 3.0).unwrap();
    let ispec = IntegrationSpec::new(300, ctx(30)).unwrap();
    let noise = NoiseSpec::new(1e-3, 42, 2).unwrap();
    let a = chirality_ensemble(&spec, &ispec, &noise, 7).unwrap();
    let b = chirality_ensemble(&spec, &ispec, &noise, 7).unwrap();
    assert_eq!(a.values, b.values);
    let other = chirality_ensemble(&spec, &ispec, &noise, 8).unwrap();
    assert_ne!(a.values, other.values);
}

#[test]
fn noise_response_is_linear_for_small_epsilon() {
    let spec = LoopSpec::unit(1.0, 1.0, Angle::zero(), 1.0).unwrap();
    let ispec = IntegrationSpec::new(400, ctx(40)).unwrap();
    let clean = rk4_transfer(&spec, &ispec, &NoiseSpec::clean(), 0).unwrap().matrix();
    let dev = |eps: f64| {
        let m = rk4_transfer(&spec, &ispec, &NoiseSpec::new(eps, 3, 1).unwrap(), 0).unwrap().matrix();
        m.sub(&clean).frobenius().to_f64()
    };
    let ratio = dev(2e-8) / dev(1e-8);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn condition_profile_starts_at_one_and_grows() {
    let spec = LoopSpec::unit(1.0, 1.0, Angle::pi_multiple(1), 4.0).unwrap();
    let p = condition_profile(&spec, &ctx(30), 64).unwrap();
    assert_eq!(p.times.len(), 64);
    assert!(p.log10_values[0].abs() < 1e-10);
    assert!(p.log10_values.iter().all(|v| *v >= -1e-10));
    assert!(p.log10_c_tc.unwrap() > 3.0);
    let eps = find_critical_epsilons(&p).unwrap();
    assert!(!eps.is_empty() && eps.iter().all(|e| *e > 0.0 && *e < 1.0));
    assert!(condition_profile(&spec, &ctx(30), 32).is_err());
}

#[test]
fn condition_profile_is_non_monotonic_off_axis() {
    let spec = LoopSpec::unit(1.0, 1.0, Angle::pi_times(0.75).unwrap(), 10.0).unwrap();
    for d in [Direction::Ccw, Direction::Cw] {
        let p = condition_profile(&spec.clone().with_direction(d), &ctx(30), 128).unwrap();
        assert!(!p.local_maxima.is_empty(), "{d:?}");
        let rises = p.log10_values.windows(2).any(|w| w[1] > w[0] + 0.5);
        let falls = p.log10_values.windows(2).any(|w| w[1] < w[0] - 0.5);
        assert!(rises && falls, "{d:?}");
    }
}

#[test]
fn sensitivity_kernel_endpoints_equal_the_cycle_norm() {
    let c = ctx(30);
    let spec = LoopSpec::unit(1.0, 1.0, Angle::pi_times(0.5).unwrap(), 2.0).unwrap();
    let period = spec.period_f64();
    let norm = transfer_one_cycle(&spec, &c).unwrap().matrix().frobenius().to_f64();
    let k = sensitivity_kernel(&spec, &c, &[0.0, 0.5 * period, period]).unwrap();
    assert!((k[0].1 / norm - 1.0).abs() < 1e-10);
    assert!((k[2].1 / norm - 1.0).abs() < 1e-10);
    assert!(k[1].1 > 0.0);
}

#[test]
fn critical_noise_follows_the_exponential_scaling_law() {
    // θi = 3π/4, ρ = 1: the χ = 0.5 boundary against the condition-number prediction
    let inv_omegas = [4.0, 6.0, 8.0, 10.0];
    let family = LoopSpec::unit(1.0, 1.0, Angle::pi_times(0.75).unwrap(), 4.0).unwrap();
    let scan = BoundaryScan {
        inv_omegas: inv_omegas.to_vec(),
        epsilon_grid: (0..8).map(|k| 10f64.powi(-3 - 2 * k)).collect(),
        threshold: 0.5,
        bisections: 3,
    };
    let ispec = IntegrationSpec::new(600, ctx(30)).unwrap();
    let b = chi_boundary_scan(&family, &scan, &ispec, &NoiseSpec::new(1e-3, 11, 1).unwrap()).unwrap();
    assert!(b.points.iter().all(|p| p.status == "ok"), "{:?}", b.points);
    let fit = b.fit.unwrap();
    assert!(fit.r_squared > 0.9, "{fit:?}");

    let pred = condition_boundary(&family, &inv_omegas, &ctx(30), 64).unwrap();
    let pfit = pred.fit.unwrap();
    let ratio = fit.slope / pfit.slope;
    assert!((0.5..=2.0).contains(&ratio), "measured {} predicted {}", fit.slope, pfit.slope);

    let slow = family.with_inv_omega(10.into()).unwrap();
    let p = condition_profile(&slow, &ctx(30), 64).unwrap();
    let est = LOG10_E * p.slope_estimate;
    eprintln!("measured {} predicted {} estimate {est}", fit.slope, pfit.slope);
    assert!((0.5..=2.0).contains(&(pfit.slope / est)), "predicted {} vs estimate {est}", pfit.slope);
}
