use std::f64::consts::PI;

use cdcert::geometry::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pt(x: f64) -> Vec3 {
    Vec3::new(x, 0.0, 0.0)
}

fn north() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

#[test]
fn interval_geodesic_is_affine() {
    let s = ModelSpace::interval(0.0, PI);
    let g = s.geodesic_shoot(&pt(1.0), &pt(0.5), 10).unwrap();
    assert!((g.speed - 0.5).abs() < 1e-15);
    for smp in &g.samples {
        assert!((smp.point[0] - (1.0 + 0.5 * smp.t)).abs() < 1e-15);
    }
    assert!(matches!(
        s.geodesic_shoot(&pt(3.0), &pt(1.0), 10),
        Err(GeometryError::LeavesChart { .. })
    ));
}

#[test]
fn sphere_quarter_turn_reaches_the_equator() {
    let s = ModelSpace::sphere2(1.0);
    let g = s
        .geodesic_shoot(&north(), &Vec3::new(PI / 2.0, 0.0, 0.0), 16)
        .unwrap();
    assert!((g.speed - PI / 2.0).abs() < 1e-14);
    assert!(g.end()[2].abs() < 1e-14);
    assert!((g.end().norm() - 1.0).abs() < 1e-14);
    assert!(g.speed_drift(&s) < 1e-8);
}

#[test]
fn circle_geodesic_wraps() {
    let s = ModelSpace::circle(2.0 * PI);
    let g = s.geodesic_shoot(&pt(0.0), &pt(1.5 * PI), 8).unwrap();
    assert!((g.speed - 1.5 * PI).abs() < 1e-15);
    assert!((s.wrap(&g.end())[0] - 1.5 * PI).abs() < 1e-12);
}

#[test]
fn distance_examples() {
    let c = ModelSpace::circle(2.0 * PI);
    assert!((c.distance(&pt(0.0), &pt(1.5 * PI)).unwrap() - PI / 2.0).abs() < 1e-14);
    let s = ModelSpace::sphere2(1.0);
    assert!((s.distance(&north(), &-north()).unwrap() - PI).abs() < 1e-14);
    let i = ModelSpace::interval(0.0, 1.0);
    assert!((i.distance(&pt(0.2), &pt(0.9)).unwrap() - 0.7).abs() < 1e-15);
    let t = ModelSpace::flat_torus(1.0, 2.0);
    let d = t
        .distance(&Vec3::new(0.1, 0.1, 0.0), &Vec3::new(0.9, 1.9, 0.0))
        .unwrap();
    assert!((d - 0.2f64.hypot(0.2)).abs() < 1e-14);
}

#[test]
fn ricci_examples() {
    let t = ModelSpace::flat_torus(1.0, 1.0);
    assert_eq!(
        t.ricci_at(&Vec3::new(0.3, 0.4, 0.0), &Vec3::new(0.6, 0.8, 0.0)),
        0.0
    );
    let s = ModelSpace::sphere2(1.0);
    let x = sphere_point(1.0, 1.1, 0.4);
    let basis = s.tangent_basis(&x);
    assert!((s.ricci_at(&x, &basis[0]) - 1.0).abs() < 1e-14);
    assert!((s.ricci_at(&x, &(basis[1] * 2.0)) - 4.0).abs() < 1e-13);
    // radius 2 halves the curvature twice
    let big = ModelSpace::sphere2(2.0);
    let y = sphere_point(2.0, 0.7, 1.0);
    assert!((big.ricci_at(&y, &big.tangent_basis(&y)[0]) - 0.25).abs() < 1e-14);
}

#[test]
fn flat_jacobi_field_is_constant() {
    let t = ModelSpace::flat_torus(2.0, 2.0);
    let g = t
        .geodesic_shoot(&Vec3::new(0.2, 0.3, 0.0), &Vec3::new(0.7, -0.4, 0.0), 20)
        .unwrap();
    let j = jacobi_evolve(&t, &g, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)).unwrap();
    for (a, y) in j.a.iter().zip(&j.detlog) {
        assert!((a - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!(y.abs() < 1e-14);
    }
}

#[test]
fn interval_jacobi_field_is_linear() {
    let s = ModelSpace::interval(0.0, 3.0);
    let g = s.geodesic_shoot(&pt(0.5), &pt(1.0), 20).unwrap();
    let c = 0.6;
    let j = jacobi_evolve(
        &s,
        &g,
        &DMatrix::identity(1, 1),
        &DMatrix::from_element(1, 1, -c),
    )
    .unwrap();
    for (t, y) in j.t.iter().zip(&j.detlog) {
        assert!((y - (1.0 - c * t).ln()).abs() < 1e-12, "t = {t}");
    }
    let fails = jacobi_evolve(
        &s,
        &g,
        &DMatrix::identity(1, 1),
        &DMatrix::from_element(1, 1, -1.5),
    );
    assert!(matches!(fails, Err(GeometryError::ConjugatePoint { .. })));
}

#[test]
fn sphere_jacobi_determinant_is_a_cosine() {
    let s = ModelSpace::sphere2(1.0);
    let theta = 1.2;
    let g = s
        .geodesic_shoot(&north(), &Vec3::new(theta, 0.0, 0.0), 40)
        .unwrap();
    let j = jacobi_evolve(&s, &g, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)).unwrap();
    for (t, y) in j.t.iter().zip(&j.detlog) {
        assert!((y - (t * theta).cos().ln()).abs() < 1e-9, "t = {t}: {y}");
    }
    // tθ reaches π/2: the normal field vanishes
    let long = s
        .geodesic_shoot(&north(), &Vec3::new(2.0, 0.0, 0.0), 40)
        .unwrap();
    assert!(matches!(
        jacobi_evolve(&s, &long, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)),
        Err(GeometryError::ConjugatePoint { .. })
    ));
}

#[test]
fn riccati_trace_identity_holds() {
    let s = ModelSpace::sphere2(1.0);
    let g = s
        .geodesic_shoot(&sphere_point(1.0, 0.8, 0.3), &Vec3::new(0.0, 1.0, 0.0), 200)
        .unwrap();
    let mut a0p = DMatrix::zeros(2, 2);
    a0p[(0, 0)] = 0.1;
    a0p[(0, 1)] = -0.15;
    a0p[(1, 0)] = -0.15;
    a0p[(1, 1)] = 0.2;
    let j = jacobi_evolve(&s, &g, &DMatrix::identity(2, 2), &a0p).unwrap();
    for i in 1..j.len() - 1 {
        let h = j.t[i + 1] - j.t[i - 1];
        let dtr = (j.u[i + 1].trace() - j.u[i - 1].trace()) / h;
        let residual = dtr + (&j.u[i] * &j.u[i]).trace() + j.ricci[i];
        assert!(residual.abs() < 1e-4, "t = {}: {residual}", j.t[i]);
        let asym = (&j.u[i] - j.u[i].transpose()).norm();
        assert!(asym < 1e-6, "U not symmetric: {asym}");
    }
}

#[test]
fn log_map_round_trip() {
    let s = ModelSpace::sphere2(1.0);
    let x = sphere_point(1.0, 0.4, 0.2);
    let y = sphere_point(1.0, 2.0, 2.5);
    let v = s.log_map(&x, &y).unwrap();
    let g = s.geodesic_shoot(&x, &v, 8).unwrap();
    assert!((g.end() - y).norm() < 1e-12);
    assert!((g.speed - s.distance(&x, &y).unwrap()).abs() < 1e-12);
    assert!(s.log_map(&north(), &-north()).is_err());
}

#[test]
fn chart_integrator_converges_on_a_warped_cylinder() {
    // constant warp: a flat cylinder, so geodesics are straight in the chart
    let chart = WarpedChart {
        base: (0.0, 4.0),
        warp: WarpFunction::Constant(1.5),
        fiber: Fiber::Circle {
            circumference: 2.0 * PI,
        },
    };
    let s = ModelSpace::warped(chart);
    let x = Vec3::new(1.0, 0.5, 0.0);
    let v = Vec3::new(0.8, 0.3, 0.0);
    let g = s.geodesic_shoot(&x, &v, 32).unwrap();
    assert!((g.end() - (x + v)).norm() < 1e-9);
    assert!(g.speed_drift(&s) < 1e-8);
}

proptest! {
    #[test]
    fn sphere_round_trip(p1 in 0.05f64..3.09, a1 in 0.0f64..6.28, p2 in 0.05f64..3.09, a2 in 0.0f64..6.28) {
        let s = ModelSpace::sphere2(1.0);
        let x = sphere_point(1.0, p1, a1);
        let y = sphere_point(1.0, p2, a2);
        let d = s.distance(&x, &y).unwrap();
        prop_assume!(d < PI - 1e-3);
        let v = s.log_map(&x, &y).unwrap();
        let g = s.geodesic_shoot(&x, &v, 16).unwrap();
        prop_assert!((g.speed - d).abs() < 1e-10);
        prop_assert!((g.end() - y).norm() < 1e-10);
        prop_assert!(g.speed_drift(&s) < 1e-8);
    }

    #[test]
    fn torus_distance_is_a_metric(a in prop::array::uniform3(0.0f64..1.0), b in prop::array::uniform3(0.0f64..1.0), c in prop::array::uniform3(0.0f64..1.0)) {
        let t = ModelSpace::flat_torus(1.0, 1.0);
        let p = |v: [f64; 3]| Vec3::new(v[0], v[1], 0.0);
        let (x, y, z) = (p(a), p(b), p(c));
        let dxy = t.distance(&x, &y).unwrap();
        prop_assert!((dxy - t.distance(&y, &x).unwrap()).abs() < 1e-15);
        prop_assert!(dxy <= t.distance(&x, &z).unwrap() + t.distance(&z, &y).unwrap() + 1e-12);
        prop_assert!(dxy <= t.diameter().unwrap() + 1e-12);
    }

    #[test]
    fn circle_distance_bounded_by_half_length(x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let c = ModelSpace::circle(3.0);
        let d = c.distance(&pt(x), &pt(y)).unwrap();
        prop_assert!(d >= 0.0 && d <= 1.5 + 1e-12);
        prop_assert!((d - c.distance(&pt(x + 3.0), &pt(y)).unwrap()).abs() < 1e-12);
    }
}
