use epchiral::sweep::evaluate_cell;
use epchiral::{
    emit_csv, emit_heatmap_svg, read_csv, run_sweep, Angle, Axis, AxisKind, Colormap, IntegrationSpec, LoopSpec,
    NoiseSpec, PrecisionContext, Quantity, SweepPlan,
};

fn plan(quantity: Quantity, noise: NoiseSpec, axes: Vec<Axis>) -> SweepPlan {
    SweepPlan {
        axes,
        template: LoopSpec::unit(1.0, 1.0, Angle::zero(), 2.0).unwrap(),
        noise,
        integration: IntegrationSpec::new(300, PrecisionContext::new(30).unwrap()).unwrap(),
        quantity,
        master_seed: 4,
        profile_samples: 64,
    }
}

fn axis(kind: AxisKind, min: f64, max: f64, n: usize) -> Axis {
    Axis { kind, min, max, n }
}

#[test]
fn noisy_sweep_is_bit_identical_across_worker_counts() {
    let p = plan(
        Quantity::ChiMean,
        NoiseSpec::new(1e-4, 9, 2).unwrap(),
        vec![axis(AxisKind::InvOmega, 2.0, 3.0, 2), axis(AxisKind::ThetaI, 0.5, 1.0, 2)],
    );
    let a = run_sweep(&p, 1).unwrap();
    let b = run_sweep(&p, 3).unwrap();
    let c = run_sweep(&p, 1).unwrap();
    assert!(a.same_grid(&b) && a.same_grid(&c));
    assert_eq!(a.failed_cells(), 0);
}

#[test]
fn one_by_one_sweep_equals_the_direct_cell() {
    let p = plan(Quantity::ChiMean, NoiseSpec::clean(), vec![axis(AxisKind::Rho, 3.0, 3.0, 1), axis(AxisKind::InvOmega, 3.8, 3.8, 1)]);
    let r = run_sweep(&p, 1).unwrap();
    assert_eq!(r.shape(), (1, 1));
    let direct = epchiral::chirality_exact(
        &LoopSpec::unit(1.0, 3.0, Angle::zero(), 3.8).unwrap(),
        &PrecisionContext::new(30).unwrap(),
    )
    .unwrap()
    .chi_mean;
    assert_eq!(r.get(0, 0).to_bits(), direct.to_bits());
    assert_eq!(evaluate_cell(&p, &[3.0, 3.8], 0).unwrap().to_bits(), direct.to_bits());
}

#[test]
fn csv_round_trip_and_heatmap() {
    let p = plan(
        Quantity::Asymmetry,
        NoiseSpec::clean(),
        vec![axis(AxisKind::InvOmega, 1.0, 3.0, 3), axis(AxisKind::Rho, 0.5, 3.0, 3)],
    );
    let r = run_sweep(&p, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    emit_csv(&r, &csv).unwrap();
    let back = read_csv(&csv).unwrap();
    assert!(back.same_grid(&r));
    let svg = dir.path().join("a.svg");
    emit_heatmap_svg(&r, &svg, Colormap::Magma, Some(&[(1.0, 0.5), (3.0, 3.0)])).unwrap();
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("polyline"));
}

#[test]
fn failed_cells_are_recorded_not_fatal() {
    // ρ = 2 from θi = 0 starts exactly on an exceptional point
    let p = plan(Quantity::ChiMean, NoiseSpec::clean(), vec![axis(AxisKind::Rho, 1.0, 2.0, 2)]);
    let r = run_sweep(&p, 1).unwrap();
    assert_eq!(r.failed_cells(), 1);
    assert!(r.get(1, 0).is_nan());
    assert_ne!(r.status[1], "ok");
}

#[test]
fn log_condition_quantity() {
    let p = plan(Quantity::LogCondition, NoiseSpec::clean(), vec![axis(AxisKind::InvOmega, 2.0, 4.0, 2)]);
    let r = run_sweep(&p, 1).unwrap();
    assert!(r.get(1, 0) > r.get(0, 0), "{:?}", r.values);
}
