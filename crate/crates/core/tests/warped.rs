use std::f64::consts::PI;
use std::sync::Arc;

use cdcert::fields::{bakry_emery_form, RicciValue};
use cdcert::geometry::{Fiber, WarpFunction};
use cdcert::warped::{
    alternative_gradient_reading, build_warped, drift_constant, fiber_constant, sphere_example,
    structural_conditions, warped_formula, warped_ricci_check, WarpedError, WarpedSpec,
};
use cdcert::{Dimension, FieldSpec, ModelSpace, Vec3};
use proptest::prelude::*;

fn spec(warp: WarpFunction, fiber: Fiber, n: f64, field: FieldSpec) -> WarpedSpec {
    WarpedSpec {
        base: (0.0, PI),
        warp,
        fiber,
        n,
        fiber_field: field,
    }
}

fn circle_fiber() -> Fiber {
    Fiber::Circle {
        circumference: 2.0 * PI,
    }
}

fn unit_sphere_fiber() -> Fiber {
    Fiber::Sphere2 { radius: 1.0 }
}

#[test]
fn constant_warp_is_a_flat_cylinder() {
    let b = build_warped(&spec(
        WarpFunction::Constant(1.0),
        circle_fiber(),
        1.0,
        FieldSpec::zero(),
    ))
    .unwrap();
    for p in b.space.sample_points(20) {
        let g = b.space.chart_metric(&p);
        assert_eq!(
            (g[(0, 0)], g[(1, 1)], g[(0, 1)], g[(1, 0)]),
            (1.0, 1.0, 0.0, 0.0)
        );
        assert_eq!(b.space.ricci_at(&p, &Vec3::new(0.3, 0.7, 0.0)), 0.0);
        assert_eq!(b.weighted.weight_at(&p), 1.0);
    }
}

#[test]
fn sine_warp_over_circle_is_round() {
    let b = build_warped(&spec(
        WarpFunction::ScaledSine(1.0),
        circle_fiber(),
        1.0,
        FieldSpec::zero(),
    ))
    .unwrap();
    for p in b.space.sample_points(30) {
        for w in b.space.unit_directions(&p, 6) {
            assert!((b.space.ricci_at(&p, &w) - 1.0).abs() < 1e-12);
            assert!((b.space.ricci_fd(&p, &w) - 1.0).abs() < 1e-4);
        }
    }
}

#[test]
fn product_metric_is_block_diagonal_and_scales_fibers() {
    let b = build_warped(&spec(
        WarpFunction::ScaledSine(0.7),
        unit_sphere_fiber(),
        4.0,
        FieldSpec::zero(),
    ))
    .unwrap();
    let p = Vec3::new(1.1, 0.9, 2.0);
    let g = b.space.chart_metric(&p);
    assert_eq!(g[(0, 1)], 0.0);
    assert_eq!(g[(0, 2)], 0.0);
    assert_eq!(g[(1, 0)], 0.0);
    let f = 0.7 * 1.1f64.sin();
    let fiber = ModelSpace::sphere2(1.0);
    let fiber_len = fiber.norm(
        &cdcert::geometry::sphere_point(1.0, 0.9, 2.0),
        &Vec3::new(0.0, 0.0, 1.0).cross(&cdcert::geometry::sphere_point(1.0, 0.9, 2.0)),
    );
    let chart_len = b.space.norm(&p, &Vec3::new(0.0, 0.0, 1.0));
    assert!((chart_len - f * fiber_len).abs() < 1e-12);
    assert!((b.weighted.weight_at(&p) - f.powf(2.0)).abs() < 1e-12);
}

#[test]
fn degenerate_warp_rejected() {
    let mut s = spec(
        WarpFunction::ScaledSine(1.0),
        circle_fiber(),
        2.0,
        FieldSpec::zero(),
    );
    s.base = (-0.5, PI);
    assert!(matches!(
        build_warped(&s),
        Err(WarpedError::DegenerateWarp { .. })
    ));
    let s = spec(
        WarpFunction::Constant(-1.0),
        circle_fiber(),
        2.0,
        FieldSpec::zero(),
    );
    assert!(matches!(
        build_warped(&s),
        Err(WarpedError::DegenerateWarp { .. })
    ));
}

#[test]
fn sine_warp_meets_conditions_with_equality() {
    let kf: f64 = 0.25;
    let s = spec(
        WarpFunction::ScaledSine(kf.sqrt()),
        unit_sphere_fiber(),
        5.0,
        FieldSpec::zero(),
    );
    for c in structural_conditions(&s, 1.0, kf) {
        assert!(c.residual.abs() < 1e-12, "{c:?}");
    }
    assert!(alternative_gradient_reading(&s, 1.0, kf));
    assert!(!alternative_gradient_reading(&s, 1.0, 0.2));
    assert!(matches!(
        warped_ricci_check(&s, 1.5, kf, 20),
        Err(WarpedError::ConditionViolated {
            condition: "warp concavity",
            ..
        })
    ));
    assert!(matches!(
        warped_ricci_check(&s, 1.0, 0.2, 20),
        Err(WarpedError::ConditionViolated {
            condition: "warp gradient",
            ..
        })
    ));
}

#[test]
fn constant_warp_formula_matches_direct_tensor() {
    for fiber in [circle_fiber(), unit_sphere_fiber()] {
        let field = match fiber {
            Fiber::Circle { .. } => FieldSpec::constant(Vec3::new(0.4, 0.0, 0.0)),
            Fiber::Sphere2 { .. } => FieldSpec::rotation(0.3),
        };
        let s = spec(WarpFunction::Constant(1.7), fiber, 4.0, field);
        let b = build_warped(&s).unwrap();
        for p in b.space.sample_points(40) {
            for w in b.space.unit_directions(&p, 6) {
                let formula = warped_formula(&s, &p, &w).finite().unwrap();
                let direct =
                    bakry_emery_form(&b.space, &b.effective, Dimension::Finite(5.0), &p, &w)
                        .finite()
                        .unwrap();
                assert!((formula - direct).abs() < 1e-8, "{formula} vs {direct}");
            }
        }
        let v = warped_ricci_check(&s, 0.0, 0.0, 30).unwrap();
        assert!(v.formula_gap < 1e-8);
    }
}

#[test]
fn constant_warp_without_drift_matches_finite_difference_curvature() {
    let s = spec(
        WarpFunction::Constant(0.8),
        unit_sphere_fiber(),
        2.0,
        FieldSpec::zero(),
    );
    let b = build_warped(&s).unwrap();
    // the polar fiber chart degenerates at the poles, so stay clear of them
    for p in [
        Vec3::new(0.5, 0.7, 1.0),
        Vec3::new(2.0, 1.6, 4.0),
        Vec3::new(1.3, 2.4, 0.2),
    ] {
        for w in b.space.unit_directions(&p, 6) {
            let formula = warped_formula(&s, &p, &w).finite().unwrap();
            assert!(
                (formula - b.space.ricci_fd(&p, &w)).abs() < 1e-4,
                "{formula} vs {}",
                b.space.ricci_fd(&p, &w)
            );
        }
    }
}

#[test]
fn sine_warp_formula_matches_direct_tensor_with_drift() {
    let s = spec(
        WarpFunction::ScaledSine(0.5),
        unit_sphere_fiber(),
        6.0,
        FieldSpec::rotation(0.4),
    );
    let v = warped_ricci_check(&s, 1.0, 0.25, 64).unwrap();
    assert!(v.formula_gap < 1e-6, "{v}");
}

#[test]
fn rotation_constant_is_one() {
    assert!((drift_constant(&FieldSpec::rotation(1.0)) - 1.0).abs() < 1e-9);
    assert!((drift_constant(&FieldSpec::rotation(0.5)) - 0.25).abs() < 1e-9);
}

#[test]
fn round_three_sphere_without_drift() {
    let ex = sphere_example(2.0, 0.0, Some(1.0), 64).unwrap();
    assert!(ex.passed(), "{}", ex.warped);
    assert!(ex.warped.margin.abs() < 1e-9);
    for p in ex.bundle.space.sample_points(20) {
        for w in ex.bundle.space.unit_directions(&p, 4) {
            assert!((ex.bundle.space.ricci_at(&p, &w) - 2.0).abs() < 1e-10);
        }
    }
}

#[test]
fn sphere_example_certified_for_several_dimensions() {
    for (n, alpha) in [(3.0, 0.0), (3.0, 0.5), (5.0, 0.5), (10.0, 0.3)] {
        let ex = sphere_example(n, alpha, None, 80).unwrap();
        assert!((ex.k_fiber - fiber_constant(n)).abs() < 1e-15);
        assert!(ex.fiber_inf >= 0.5 - 1e-9, "N={n}: {}", ex.fiber_inf);
        assert!(ex.warped.fiber_hypothesis);
        assert!(ex.warped.passed, "N={n} α={alpha}: {}", ex.warped);
        assert!(ex.warped.formula_gap < 1e-6);
        assert!(
            ex.diameter.passed && ex.diameter.hypothesis_met,
            "{}",
            ex.diameter
        );
        assert!((ex.diameter.lhs - PI).abs() < 1e-12);
        assert!(ex.passed());
    }
}

#[test]
fn printed_fiber_constant_breaks_the_example() {
    let printed = |n: f64| 1.0 / (2.0 * (n - 2.0));
    let ex = sphere_example(3.0, 0.5, Some(printed(3.0)), 80).unwrap();
    assert!(!ex.warped.fiber_hypothesis);
    assert!(ex.warped.margin < -1e-3, "{}", ex.warped);
    assert!(!ex.passed());
    // without drift the printed value is still admissible
    let ex = sphere_example(3.0, 0.0, Some(printed(3.0)), 40).unwrap();
    assert!(ex.passed(), "{}", ex.warped);
}

#[test]
fn example_parameters_are_validated() {
    assert!(sphere_example(3.0, 0.6, None, 10).is_err());
    assert!(sphere_example(2.0, 0.1, None, 10).is_err());
    assert!(sphere_example(2.2, 0.4, None, 10).is_err());
}

#[test]
fn fiber_bound_limits_the_fiber_constant() {
    let s = spec(
        WarpFunction::ScaledSine(0.5),
        unit_sphere_fiber(),
        4.0,
        FieldSpec::zero(),
    );
    // without drift the fiber bound holds up to K_F = 1/(N−1)
    let v = warped_ricci_check(&s, 1.0, 0.25, 40).unwrap();
    assert!(v.passed);
    let wide = WarpedSpec {
        warp: WarpFunction::ScaledSine(0.8),
        ..s
    };
    let v = warped_ricci_check(&wide, 1.0, 0.64, 40).unwrap();
    assert!(!v.fiber_hypothesis && !v.passed && v.margin < 0.0);
    assert!(matches!(v.fiber_inf, RicciValue::Finite(x) if (x - 1.0).abs() < 1e-9));
}

#[test]
fn weight_is_warp_power() {
    let warp = WarpFunction::Custom(Arc::new(|r: f64| [2.0 + r.cos(), -r.sin(), -r.cos()]));
    let b = build_warped(&spec(warp, circle_fiber(), 3.5, FieldSpec::zero())).unwrap();
    let p = Vec3::new(0.8, 1.0, 0.0);
    assert!((b.weighted.weight_at(&p) - (2.0 + 0.8f64.cos()).powf(2.5)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn formula_equals_direct_tensor(
        r in 0.3f64..2.8, a in 0.3f64..2.8, b in 0.0f64..6.2,
        xi in -1.0f64..1.0, va in -1.0f64..1.0, vb in -1.0f64..1.0,
        alpha in 0.0f64..0.5, n in 2.5f64..8.0,
    ) {
        let s = spec(WarpFunction::ScaledSine(0.6), unit_sphere_fiber(), n, FieldSpec::rotation(alpha));
        let bundle = build_warped(&s).unwrap();
        let p = Vec3::new(r, a, b);
        let w = Vec3::new(xi, va, vb);
        let formula = warped_formula(&s, &p, &w).finite().unwrap();
        let direct = bakry_emery_form(&bundle.space, &bundle.effective, Dimension::Finite(n + 1.0), &p, &w).finite().unwrap();
        prop_assert!((formula - direct).abs() < 1e-6 * (1.0 + formula.abs()), "{} vs {}", formula, direct);
    }
}
