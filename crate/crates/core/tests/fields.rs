use std::f64::consts::PI;
use std::sync::Arc;

use cdcert::fields::*;
use cdcert::geometry::{sphere_point, GeodesicPath};
use cdcert::{Dimension, FieldSpec, ModelSpace, Vec3};
use proptest::prelude::*;

fn pt(x: f64) -> Vec3 {
    Vec3::new(x, 0.0, 0.0)
}

// unit tangent pointing away from the north pole
fn meridian_at(polar: f64, azimuth: f64) -> Vec3 {
    Vec3::new(
        polar.cos() * azimuth.cos(),
        polar.cos() * azimuth.sin(),
        -polar.sin(),
    )
}

fn fin(v: RicciValue) -> f64 {
    v.finite().expect("finite Ricci value")
}

#[test]
fn line_integral_examples() {
    let line = ModelSpace::interval(-5.0, 5.0);
    let g = GeodesicPath::segment(&pt(-1.0), &pt(2.5), 32);
    assert_eq!(line_integral(&line, &g, &FieldSpec::zero(), 1.0), 0.0);
    let c = 0.7;
    let phi = line_integral(&line, &g, &FieldSpec::constant(pt(c)), 1.0);
    assert!((phi - c * 3.5).abs() < 1e-12);

    let circle = ModelSpace::circle(2.0 * PI);
    let g = circle.geodesic_shoot(&pt(0.3), &pt(PI), 16).unwrap();
    let phi = line_integral(&circle, &g, &FieldSpec::constant(pt(0.3)), 1.0);
    assert!((phi - 0.3 * PI).abs() < 1e-12);
    assert_eq!(
        line_integral(&circle, &g, &FieldSpec::constant(pt(0.3)), 0.0),
        0.0
    );
}

#[test]
fn gradient_fields_integrate_to_potential_differences() {
    let line = ModelSpace::interval(-3.0, 3.0);
    let g = GeodesicPath::segment(&pt(-1.2), &pt(2.0), 40);
    // toolkit convention: the OU drift is Z = -∇V, so φ_t = V(γ_0) - V(γ_t)
    let ou = FieldSpec::ou(1.5, 0.2);
    let v = |x: f64| 0.75 * (x - 0.2) * (x - 0.2);
    for t in [0.1, 0.37, 0.8, 1.0] {
        let phi = line_integral(&line, &g, &ou, t);
        let xt = -1.2 + 3.2 * t;
        assert!((phi - (v(-1.2) - v(xt))).abs() < 1e-8, "t = {t}");
    }
    // and with Z = +∇f the sign flips
    let f = |x: f64| x.sin() + 0.1 * x * x * x;
    let grad = FieldSpec::new(
        "grad-f",
        Arc::new(|p: &Vec3| pt(p[0].cos() + 0.3 * p[0] * p[0])),
    );
    for t in [0.25, 0.5, 1.0] {
        let phi = line_integral(&line, &g, &grad, t);
        let xt = -1.2 + 3.2 * t;
        assert!((phi - (f(xt) - f(-1.2))).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn sphere_rotation_line_integral_along_a_latitude_free_path() {
    // along a meridian the rotation field is orthogonal to the motion
    let s = ModelSpace::sphere2(1.0);
    let x = sphere_point(1.0, 0.3, 0.7);
    let y = sphere_point(1.0, 2.5, 0.7);
    let g = s
        .geodesic_shoot(&x, &s.log_map(&x, &y).unwrap(), 32)
        .unwrap();
    assert!(line_integral(&s, &g, &FieldSpec::rotation(0.4), 1.0).abs() < 1e-12);
}

#[test]
fn symmetric_derivative_examples() {
    let line = ModelSpace::interval(-1.0, 1.0);
    let z = FieldSpec::new("minus-x", Arc::new(|p: &Vec3| pt(-p[0])));
    assert!((symmetric_derivative(&line, &z, &pt(0.5), &pt(1.0)) + 1.0).abs() < 1e-9);

    let circle = ModelSpace::circle(2.0 * PI);
    assert_eq!(
        symmetric_derivative(&circle, &FieldSpec::constant(pt(0.8)), &pt(1.0), &pt(1.0)),
        0.0
    );

    let s = ModelSpace::sphere2(1.0);
    let x = sphere_point(1.0, 1.0, 0.5);
    let meridian = meridian_at(1.0, 0.5);
    let rot = FieldSpec::rotation(0.6);
    assert!(symmetric_derivative(&s, &rot, &x, &meridian).abs() < 1e-14);
    // finite differences agree with the analytic Jacobian
    assert!(symmetric_derivative(&s, &rot.clone().without_jacobian(), &x, &meridian).abs() < 1e-8);
}

#[test]
fn finite_differences_match_analytic_jacobians() {
    let line = ModelSpace::interval(-2.0, 2.0);
    let v = FieldSpec::gradient_of_polynomial(vec![0.0, 0.3, -0.5, 0.2, 0.1]);
    for x in [-1.5, -0.2, 0.4, 1.7] {
        let a = symmetric_derivative(&line, &v, &pt(x), &pt(1.0));
        let b = symmetric_derivative(&line, &v.clone().without_jacobian(), &pt(x), &pt(1.0));
        assert!((a - b).abs() < 1e-8, "x = {x}: {a} vs {b}");
    }
}

#[test]
fn bakry_emery_examples() {
    let s = ModelSpace::sphere2(1.0);
    let x = sphere_point(1.0, 0.9, 2.0);
    for v in s.unit_directions(&x, 6) {
        assert!(
            (fin(bakry_emery_at(
                &s,
                &FieldSpec::zero(),
                Dimension::Finite(2.0),
                &x,
                &v
            )) - 1.0)
                .abs()
                < 1e-14
        );
    }
    let circle = ModelSpace::circle(2.0 * PI);
    let c = 0.8;
    let z = FieldSpec::constant(pt(c));
    assert_eq!(
        fin(bakry_emery_at(
            &circle,
            &z,
            Dimension::Infinite,
            &pt(1.0),
            &pt(1.0)
        )),
        0.0
    );
    assert!(
        (fin(bakry_emery_at(
            &circle,
            &z,
            Dimension::Finite(2.0),
            &pt(1.0),
            &pt(1.0)
        )) + c * c)
            .abs()
            < 1e-14
    );
    // N = n with drift along v, and N below n
    assert_eq!(
        bakry_emery_at(&circle, &z, Dimension::Finite(1.0), &pt(1.0), &pt(1.0)),
        RicciValue::MinusInfinity
    );
    assert_eq!(
        bakry_emery_at(
            &s,
            &FieldSpec::zero(),
            Dimension::Finite(1.5),
            &x,
            &s.tangent_basis(&x)[0]
        ),
        RicciValue::MinusInfinity
    );
    // N = n with a drift orthogonal to v keeps Ric - ∇ˢZ
    let meridian = meridian_at(0.9, 2.0);
    let rot = FieldSpec::rotation(0.3);
    assert!(s.inner(&x, &rot.eval(&x), &meridian).abs() < 1e-12);
    assert!(
        (fin(bakry_emery_at(
            &s,
            &rot,
            Dimension::Finite(2.0),
            &x,
            &meridian
        )) - 1.0)
            .abs()
            < 1e-12
    );
}

#[test]
fn extra_dimension_relabelling() {
    let circle = ModelSpace::circle(2.0 * PI);
    let z = FieldSpec::constant(pt(0.5));
    let a = bakry_emery_excess(&circle, &z, Dimension::Finite(2.0), &pt(0.0), &pt(1.0));
    let b = bakry_emery_at(&circle, &z, Dimension::Finite(3.0), &pt(0.0), &pt(1.0));
    assert_eq!(a, b);
    assert!((fin(a) + 0.125).abs() < 1e-15);
}

#[test]
fn lower_bound_scans() {
    let s = ModelSpace::sphere2(1.0);
    let r = lower_bound_scan(&s, &FieldSpec::zero(), Dimension::Finite(2.0), 100, 8);
    assert!((fin(r.inf_estimate) - 1.0).abs() < 1e-9);
    assert_eq!(r.samples.len(), 800);

    let circle = ModelSpace::circle(2.0 * PI);
    let r = lower_bound_scan(
        &circle,
        &FieldSpec::constant(pt(0.4)),
        Dimension::Infinite,
        32,
        2,
    );
    assert_eq!(fin(r.inf_estimate), 0.0);

    // rotation with α ≤ 1/2 on the unit sphere keeps ric^N ≥ 1/2 for N > 2
    for (alpha, n) in [(0.5, 3.0), (0.3, 2.5), (0.5, 10.0)] {
        let r = lower_bound_scan(
            &s,
            &FieldSpec::rotation(alpha),
            Dimension::Finite(n),
            200,
            12,
        );
        let inf = fin(r.inf_estimate);
        assert!(inf >= 0.5, "alpha {alpha}, N {n}: {inf}");
        assert!(r.certifies(0.5, 0.0));
    }
    // a scan containing -∞ has no finite bound
    let r = lower_bound_scan(
        &circle,
        &FieldSpec::constant(pt(0.4)),
        Dimension::Finite(1.0),
        8,
        2,
    );
    assert_eq!(r.inf_estimate, RicciValue::MinusInfinity);
    assert!(!r.certifies(-1e9, 0.0));
}

proptest! {
    #[test]
    fn line_integral_is_additive(a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.05f64..0.95, s in 0.1f64..3.0) {
        prop_assume!((a - b).abs() > 1e-3);
        let line = ModelSpace::interval(-3.0, 3.0);
        let z = FieldSpec::gradient_of_polynomial(vec![0.0, 0.2, s, -0.1]);
        let g = GeodesicPath::segment(&pt(a), &pt(b), 64);
        let whole = line_integral(&line, &g, &z, 1.0);
        let head = line_integral(&line, &g, &z, t);
        let rest = GeodesicPath::segment(&pt(a + t * (b - a)), &pt(b), 64);
        let tail = line_integral(&line, &rest, &z, 1.0);
        prop_assert!((head + tail - whole).abs() < 1e-8, "{head} + {tail} != {whole}");
    }

    #[test]
    fn reversal_negates(a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.1f64..3.0) {
        let line = ModelSpace::interval(-3.0, 3.0);
        let z = FieldSpec::ou(s, 0.4);
        let g = GeodesicPath::segment(&pt(a), &pt(b), 32);
        let fwd = line_integral(&line, &g, &z, 1.0);
        let back = line_integral(&line, &g.reversed(), &z, 1.0);
        prop_assert!((fwd + back).abs() < 1e-10);
    }

    #[test]
    fn profile_matches_pointwise(t1 in 0.0f64..0.5, t2 in 0.5f64..1.0) {
        let s = ModelSpace::sphere2(1.0);
        let x = sphere_point(1.0, 0.7, 0.1);
        let g = s.geodesic_shoot(&x, &s.tangent_basis(&x)[1], 24).unwrap();
        let z = FieldSpec::rotation(0.8);
        let prof = line_integral_profile(&s, &g, &z, &[t1, t2]);
        prop_assert!((prof[0] - line_integral(&s, &g, &z, t1)).abs() < 1e-12);
        prop_assert!((prof[1] - line_integral(&s, &g, &z, t2)).abs() < 1e-12);
    }

    #[test]
    fn bakry_emery_form_is_quadratic(x in -1.0f64..1.0, scale in 0.1f64..5.0, n in 1.5f64..10.0) {
        let line = ModelSpace::interval(-2.0, 2.0);
        let z = FieldSpec::gradient_of_polynomial(vec![0.0, 0.5, 1.0, 0.3]);
        let one = fin(bakry_emery_form(&line, &z, Dimension::Finite(n), &pt(x), &pt(1.0)));
        let many = fin(bakry_emery_form(&line, &z, Dimension::Finite(n), &pt(x), &pt(scale)));
        prop_assert!((many - scale * scale * one).abs() < 1e-10 * (1.0 + many.abs()));
    }

    #[test]
    fn sphere_ricci_is_quadratic(polar in 0.1f64..3.0, az in 0.0f64..6.2, scale in 0.1f64..5.0) {
        let s = ModelSpace::sphere2(1.0);
        let x = sphere_point(1.0, polar, az);
        let v = s.unit_directions(&x, 5)[2];
        prop_assert!((s.ricci_at(&x, &(v * scale)) - scale * scale).abs() < 1e-12 * scale * scale);
    }
}
