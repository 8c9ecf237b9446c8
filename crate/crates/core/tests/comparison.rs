use std::f64::consts::PI;

use cdcert::comparison::{
    bishop_gromov_all, bishop_gromov_check, bonnet_myers_check, packing_ratios,
    total_weighted_mass, volume_profile, ComparisonError, DEFAULT_RAYS,
};
use cdcert::fields::lower_bound_scan;
use cdcert::geometry::{sphere_point, Fiber, WarpFunction, WarpedChart};
use cdcert::{Dimension, FieldSpec, ModelSpace, Vec3};
use proptest::prelude::*;

fn sphere_radii() -> Vec<f64> {
    (1..=12).map(|i| i as f64 * PI / 12.0).collect()
}

#[test]
fn sphere_caps_without_drift() {
    let space = ModelSpace::sphere2(1.0);
    let x0 = sphere_point(1.0, 0.8, 2.1);
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &x0,
        &sphere_radii(),
        DEFAULT_RAYS,
    )
    .unwrap();
    for (i, &r) in p.radii.iter().enumerate() {
        assert!(
            (p.v[i] - 2.0 * PI * (1.0 - r.cos())).abs() < 1e-6,
            "r={r}: {}",
            p.v[i]
        );
        assert!((p.s[i] - 2.0 * PI * r.sin()).abs() < 1e-6);
    }
}

#[test]
fn interval_ball_is_clipped() {
    let space = ModelSpace::interval(0.0, PI);
    let x0 = Vec3::new(PI / 2.0, 0.0, 0.0);
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &x0,
        &[0.3, 1.0, PI / 2.0, 2.5],
        DEFAULT_RAYS,
    )
    .unwrap();
    for (i, &r) in p.radii.iter().enumerate() {
        assert!((p.v[i] - 2.0 * r.min(PI / 2.0)).abs() < 1e-12);
    }
    assert_eq!(p.s[3], 0.0);
}

#[test]
fn drifted_circle_profile() {
    let c = 0.4;
    let space = ModelSpace::circle(2.0 * PI);
    let field = FieldSpec::constant(Vec3::new(c, 0.0, 0.0));
    let radii = [0.5, 1.0, 2.0, 3.0];
    let p = volume_profile(&space, &field, &Vec3::zeros(), &radii, DEFAULT_RAYS).unwrap();
    for (i, &r) in radii.iter().enumerate() {
        let exact = ((c * r).exp() - (-c * r).exp()) / c;
        assert!(
            (p.v[i] - exact).abs() < 1e-10 * exact,
            "{} vs {exact}",
            p.v[i]
        );
        assert!((p.s[i] - 2.0 * (c * r).cosh()).abs() < 1e-10);
    }
}

#[test]
fn torus_disks_and_total_mass() {
    let space = ModelSpace::flat_torus(3.0, 2.0);
    let x0 = Vec3::new(0.4, 1.9, 0.0);
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &x0,
        &[0.25, 0.5, 1.0],
        DEFAULT_RAYS,
    )
    .unwrap();
    for (i, &r) in p.radii.iter().enumerate() {
        assert!((p.v[i] - PI * r * r).abs() < 1e-9);
    }
    let m = total_weighted_mass(&space, &FieldSpec::zero(), &x0).unwrap();
    assert!((m - 6.0).abs() < 1e-10);
    assert!(matches!(
        volume_profile(&space, &FieldSpec::zero(), &x0, &[1.2], DEFAULT_RAYS),
        Err(ComparisonError::RadiusOutOfRange { .. })
    ));
}

#[test]
fn weighted_reference_measure_enters() {
    let space =
        ModelSpace::interval(-1.0, 1.0).with_weight(std::sync::Arc::new(|p: &Vec3| 2.0 + p[0]));
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &Vec3::zeros(),
        &[0.5],
        DEFAULT_RAYS,
    )
    .unwrap();
    assert!((p.v[0] - 2.0).abs() < 1e-12);
}

#[test]
fn sphere_is_the_equality_case() {
    let space = ModelSpace::sphere2(1.0);
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &sphere_point(1.0, 1.3, 0.2),
        &sphere_radii(),
        DEFAULT_RAYS,
    )
    .unwrap();
    for v in bishop_gromov_check(&p, 1.0, 2.0, PI / 6.0, 5.0 * PI / 6.0).unwrap() {
        assert!(v.passed && v.margin.abs() < 1e-5, "{v}");
    }
    for v in bishop_gromov_all(&p, 1.0, 2.0).unwrap() {
        assert!(v.passed && v.margin.abs() < 1e-5, "{v}");
    }
}

#[test]
fn sphere_rejects_excess_curvature() {
    let space = ModelSpace::sphere2(1.0);
    let radii: Vec<f64> = (1..=8).map(|i| i as f64 * 0.3).collect();
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &sphere_point(1.0, 0.5, 0.0),
        &radii,
        DEFAULT_RAYS,
    )
    .unwrap();
    let worst = bishop_gromov_all(&p, 1.5, 2.0).unwrap();
    assert!(worst.iter().any(|v| !v.passed));
}

#[test]
fn flat_interval_ball_ratio_at_dimension_one() {
    let space = ModelSpace::interval(0.0, PI);
    let p = volume_profile(
        &space,
        &FieldSpec::zero(),
        &Vec3::new(PI / 2.0, 0.0, 0.0),
        &[0.2, 0.7, 1.5],
        DEFAULT_RAYS,
    )
    .unwrap();
    let v = bishop_gromov_check(&p, 0.0, 1.0, 0.2, 1.5).unwrap();
    assert_eq!(v.len(), 1);
    assert!(v[0].passed && v[0].margin.abs() < 1e-12, "{}", v[0]);
    assert!(matches!(
        bishop_gromov_check(&p, 0.5, 1.0, 0.2, 1.5),
        Err(ComparisonError::BadDimension(_))
    ));
    assert!(matches!(
        bishop_gromov_check(&p, 0.0, 1.0, 0.3, 1.5),
        Err(ComparisonError::NotOnGrid(_))
    ));
}

#[test]
fn drifted_circle_passes_at_scanned_curvature() {
    let c = 0.6;
    let space = ModelSpace::circle(2.0 * PI);
    let field = FieldSpec::constant(Vec3::new(c, 0.0, 0.0));
    let k = lower_bound_scan(&space, &field, Dimension::Finite(2.0), 32, 1)
        .inf_estimate
        .finite()
        .unwrap();
    assert!((k + c * c).abs() < 1e-12);
    let radii: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
    let p = volume_profile(
        &space,
        &field,
        &Vec3::new(1.0, 0.0, 0.0),
        &radii,
        DEFAULT_RAYS,
    )
    .unwrap();
    for v in bishop_gromov_all(&p, k, 2.0).unwrap() {
        assert!(v.passed, "{v}");
    }
}

#[test]
fn diameter_bound_on_the_round_sphere() {
    let space = ModelSpace::sphere2(1.0);
    let v = bonnet_myers_check(&space, &FieldSpec::zero(), 1.0, 2.0).unwrap();
    assert!(v.passed && v.hypothesis_met, "{v}");
    assert!(v.margin.abs() < 1e-8);
    let vacuous = bonnet_myers_check(&space, &FieldSpec::zero(), 4.0, 2.0).unwrap();
    assert!(vacuous.passed && !vacuous.hypothesis_met);
    assert!(vacuous.lhs > vacuous.rhs);
    assert!(bonnet_myers_check(&space, &FieldSpec::zero(), 0.0, 2.0).is_err());
}

#[test]
fn packing_without_drift_recovers_total_mass() {
    let space = ModelSpace::sphere2(1.0);
    let r = packing_ratios(&space, &FieldSpec::zero(), &[0.4, PI]).unwrap();
    assert!((r.big_m - 4.0 * PI).abs() < 1e-6);
    assert!((r.small_m - 4.0 * PI).abs() < 1e-6);
    assert!((r.ratio - 1.0).abs() < 1e-6);
    assert!(r.per_eps[0].1 > 1);
    let interval = ModelSpace::interval(0.0, 2.0);
    let r = packing_ratios(&interval, &FieldSpec::zero(), &[0.3, 1.0]).unwrap();
    assert!((r.small_m - 2.0).abs() < 1e-12);
    assert!(r.ratio <= 1.0 + 1e-12 && r.ratio > 0.95, "{}", r.ratio);
}

#[test]
fn packing_with_bounded_drift_respects_envelope() {
    let circle = ModelSpace::circle(4.0);
    let field = FieldSpec::constant(Vec3::new(0.5, 0.0, 0.0));
    let r = packing_ratios(&circle, &field, &[0.2, 0.5, 2.0]).unwrap();
    assert!(r.within_envelope(), "{} vs {}", r.ratio, r.envelope);
    assert!(r.ratio > 1.0);
    let single = volume_profile(&circle, &field, &Vec3::zeros(), &[0.5], DEFAULT_RAYS)
        .unwrap()
        .v[0];
    assert!(r.big_m >= single);

    let sphere = ModelSpace::sphere2(1.0);
    let r = packing_ratios(&sphere, &FieldSpec::rotation(0.3), &[0.5]).unwrap();
    assert!(r.within_envelope());
}

#[test]
fn warped_models_are_rejected() {
    let space = ModelSpace::warped(WarpedChart {
        base: (0.0, PI),
        warp: WarpFunction::ScaledSine(1.0),
        fiber: Fiber::Circle {
            circumference: 2.0 * PI,
        },
    });
    assert!(matches!(
        volume_profile(
            &space,
            &FieldSpec::zero(),
            &Vec3::new(1.0, 0.0, 0.0),
            &[0.5],
            DEFAULT_RAYS
        ),
        Err(ComparisonError::Geometry(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profiles_are_monotone_and_lipschitz(polar in 0.2f64..2.9, az in 0.0f64..6.2, alpha in -0.5f64..0.5) {
        let space = ModelSpace::sphere2(1.0);
        let radii: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
        let p = volume_profile(&space, &FieldSpec::rotation(alpha), &sphere_point(1.0, polar, az), &radii, 64).unwrap();
        // |Z| ≤ |α| on the unit sphere bounds the sphere integrals by 2π e^{|α|r}
        for i in 1..radii.len() {
            prop_assert!(p.v[i] >= p.v[i - 1]);
            let q = (p.v[i] - p.v[i - 1]) / (radii[i] - radii[i - 1]);
            prop_assert!(q <= 2.0 * PI * (alpha.abs() * radii[i]).exp());
            prop_assert!(p.s[i] <= 2.0 * PI * (alpha.abs() * radii[i]).exp());
        }
    }

    #[test]
    fn drift_reversal_on_circle_is_symmetric(c in -1.0f64..1.0, r in 0.1f64..3.0) {
        let space = ModelSpace::circle(2.0 * PI);
        let a = volume_profile(&space, &FieldSpec::constant(Vec3::new(c, 0.0, 0.0)), &Vec3::zeros(), &[r], 2).unwrap();
        let b = volume_profile(&space, &FieldSpec::constant(Vec3::new(-c, 0.0, 0.0)), &Vec3::zeros(), &[r], 2).unwrap();
        prop_assert!((a.v[0] - b.v[0]).abs() < 1e-10 * a.v[0]);
    }
}
