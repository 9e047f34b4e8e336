use epchiral::sweep::write_csv;
use epchiral::{
    condition_number_2x2, eigenframe, nonchirality, read_csv, transfer_one_cycle, transition_probabilities, Angle,
    Axis, AxisKind, Direction, IntegrationSpec, LabelPolicy, LoopSpec, Mat2, NoiseSpec, PrecisionContext, Quantity,
    SweepPlan, SweepResult,
};
use proptest::prelude::*;
use rug::Complex;

fn ctx() -> PrecisionContext {
    PrecisionContext::new(30).unwrap()
}

fn small_loop() -> impl Strategy<Value = LoopSpec> {
    (0u32..=15, 2u32..=25, 0u32..40, 10u32..=30).prop_filter_map("on an exceptional point", |(g, r, t, w)| {
        let spec = LoopSpec::unit(g as f64 / 10.0, r as f64 / 10.0, Angle::pi_times(t as f64 / 20.0).ok()?, w as f64 / 10.0).ok()?;
        eigenframe(&spec, &spec.theta_i, &ctx(), LabelPolicy::PrincipalBranch).ok()?;
        Some(spec)
    })
}

fn matrix() -> impl Strategy<Value = Mat2> {
    prop::array::uniform8(-1.0f64..1.0).prop_map(|v| {
        let c = |k: usize| Complex::with_val(128, (v[2 * k], v[2 * k + 1]));
        Mat2::new(c(0), c(1), c(2), c(3))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn determinant_is_one(spec in small_loop(), cw in any::<bool>()) {
        let spec = if cw { spec.with_direction(Direction::Cw) } else { spec };
        let tm = transfer_one_cycle(&spec, &ctx()).unwrap();
        prop_assert!(tm.residuals.det_residual < ctx().residual_tolerance());
    }

    #[test]
    fn transition_columns_sum_to_one(spec in small_loop()) {
        let s = transfer_one_cycle(&spec, &ctx()).unwrap().matrix();
        let f = eigenframe(&spec, &spec.theta_i, &ctx(), LabelPolicy::PrincipalBranch).unwrap();
        let t = transition_probabilities(&s, &f, &f).unwrap();
        for col in 0..2 {
            prop_assert!((t.p[0][col] + t.p[1][col] - 1.0).abs() < 1e-12);
            prop_assert!(t.p[0][col] >= 0.0 && t.p[1][col] >= 0.0);
        }
    }

    #[test]
    fn chirality_is_a_label_free_fraction(spec in small_loop()) {
        let c = ctx();
        let a = transfer_one_cycle(&spec, &c).unwrap().matrix();
        let b = transfer_one_cycle(&spec.clone().with_direction(Direction::Cw), &c).unwrap().matrix();
        let f = eigenframe(&spec, &spec.theta_i, &c, LabelPolicy::PrincipalBranch).unwrap();
        let x = nonchirality(&a, &b, &f).unwrap();
        let y = nonchirality(&a, &b, &f.swapped()).unwrap();
        for v in [x.chi_plus, x.chi_minus, x.chi_mean] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((x.chi_mean - y.chi_mean).abs() < 1e-12);
    }

    #[test]
    fn condition_number_is_at_least_one(m in matrix()) {
        if let Ok(c) = condition_number_2x2(&m, &ctx()) {
            prop_assert!(c >= 1.0 - 1e-25);
        }
    }

    #[test]
    fn csv_round_trip(values in prop::collection::vec(prop_oneof![Just(f64::NAN), -1e300f64..1e300], 6)) {
        let plan = SweepPlan {
            axes: vec![
                Axis { kind: AxisKind::InvOmega, min: 1.0, max: 2.0, n: 2 },
                Axis { kind: AxisKind::Rho, min: 0.5, max: 1.5, n: 3 },
            ],
            template: LoopSpec::unit(1.0, 1.0, Angle::zero(), 2.0).unwrap(),
            noise: NoiseSpec::clean(),
            integration: IntegrationSpec::new(100, ctx()).unwrap(),
            quantity: Quantity::ChiMean,
            master_seed: 0,
            profile_samples: 64,
        };
        let status = values.iter().map(|v| if v.is_nan() { "overflow".to_string() } else { "ok".to_string() }).collect();
        let r = SweepResult { plan, values, status, engine_version: "test".into(), wall_time_s: 0.0 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut bytes = Vec::new();
        write_csv(&r, &mut bytes).unwrap();
        std::fs::write(&path, &bytes).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert!(back.same_grid(&r));
    }
}
