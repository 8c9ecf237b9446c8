use cdcert::entropy::DiscreteMeasure;
use cdcert::transport::*;
use cdcert::{Density1d, Grid1d, ModelSpace, Vec3};
use proptest::prelude::*;

fn line(xs: &[f64], w: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::on_line(xs, w.to_vec())
}

// brute force over all permutations for uniform n-point measures
fn permutation_cost(xs: &[f64], ys: &[f64], space: &ModelSpace) -> f64 {
    fn rec(
        i: usize,
        used: &mut Vec<bool>,
        xs: &[f64],
        ys: &[f64],
        space: &ModelSpace,
        acc: f64,
        best: &mut f64,
    ) {
        if i == xs.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..ys.len() {
            if !used[j] {
                used[j] = true;
                let d = space
                    .distance(&Vec3::new(xs[i], 0.0, 0.0), &Vec3::new(ys[j], 0.0, 0.0))
                    .unwrap();
                rec(i + 1, used, xs, ys, space, acc + d * d, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut vec![false; ys.len()], xs, ys, space, 0.0, &mut best);
    best / xs.len() as f64
}

#[test]
fn exact_identity_plan_has_zero_cost() {
    let s = ModelSpace::interval(0.0, 5.0);
    let mu = line(&[0.5, 1.0, 3.0], &[0.2, 0.3, 0.5]);
    let plan = ot_exact(&mu, &mu, &s).unwrap();
    assert!(plan.cost.abs() < 1e-14);
}

#[test]
fn exact_point_masses() {
    let s = ModelSpace::interval(0.0, 5.0);
    let plan = ot_exact(&line(&[1.0], &[1.0]), &line(&[3.5], &[1.0]), &s).unwrap();
    assert_eq!(plan.pairs.len(), 1);
    assert!((plan.cost - 6.25).abs() < 1e-14);
}

#[test]
fn exact_two_point_shift_prefers_monotone_matching() {
    let s = ModelSpace::interval(-1.0, 12.0);
    let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
    let nu = line(&[10.0, 11.0], &[0.5, 0.5]);
    let plan = ot_exact(&mu, &nu, &s).unwrap();
    assert!((plan.cost - 100.0).abs() < 1e-10);
    for p in &plan.pairs {
        assert_eq!(p.source, p.target);
    }
}

#[test]
fn exact_rejects_large_supports() {
    let s = ModelSpace::interval(0.0, 1.0);
    let xs: Vec<f64> = (0..401).map(|i| i as f64 / 401.0).collect();
    let mu = line(&xs, &vec![1.0 / 401.0; 401]);
    assert!(matches!(
        ot_exact(&mu, &mu, &s),
        Err(TransportError::SizeExceeded { .. })
    ));
}

#[test]
fn exact_matches_permutation_brute_force() {
    let s = ModelSpace::circle(2.0 * std::f64::consts::PI);
    let xs = [0.1, 1.7, 2.9, 4.4, 6.0];
    let ys = [0.5, 3.3, 5.2, 5.9, 1.1];
    let w = vec![0.2; 5];
    let plan = ot_exact(&line(&xs, &w), &line(&ys, &w), &s).unwrap();
    assert!((plan.cost - permutation_cost(&xs, &ys, &s)).abs() < 1e-12);
}

#[test]
fn monotone_translation_cost() {
    let s = ModelSpace::interval(-2.0, 5.0);
    let g = Grid1d::new(-2.0, 5.0, 700, false);
    let mu = Density1d::block(g.clone(), 0.0, 1.0);
    let nu = Density1d::block(g, 1.7, 2.7);
    assert!((w2_squared_1d(&mu, &nu) - 1.7 * 1.7).abs() < 1e-12);
    // atomic version of the same translation
    let a = ot_1d(&mu.to_measure(), &nu.to_measure(), &s).unwrap();
    assert!((a.cost - 1.7 * 1.7).abs() < 1e-10);
}

#[test]
fn shifted_bump_cost_is_shift_squared() {
    let g = Grid1d::new(-4.0, 4.0, 800, false);
    let f = |c: f64| move |x: f64| (-(x - c) * (x - c) / 0.5).exp();
    let mu = Density1d::from_fn(g.clone(), f(-0.5));
    let nu = Density1d::from_fn(g, f(0.7));
    assert!((w2_squared_1d(&mu, &nu) - 1.44).abs() < 1e-4);
}

#[test]
fn circle_shift_goes_the_short_way() {
    let l = 2.0 * std::f64::consts::PI;
    let g = Grid1d::new(0.0, l, 600, true);
    let mu = Density1d::bump(g.clone(), 0.3, 0.4);
    let nu = Density1d::bump(g, l - 0.5, 0.4);
    assert!((w2_squared_1d(&mu, &nu) - 0.64).abs() < 1e-6);
}

#[test]
fn displacement_of_translated_block() {
    let s = ModelSpace::interval(-1.0, 4.0);
    let g = Grid1d::new(-1.0, 4.0, 500, false);
    let mu = Density1d::block(g.clone(), 0.0, 1.0);
    let nu = Density1d::block(g, 2.0, 3.0);
    let (plan, path) = displacement_1d(&s, &mu, &nu, 5).unwrap();
    assert!((plan.w2_squared() - 4.0).abs() < 1e-10);
    for (k, &t) in path.t_grid.iter().enumerate() {
        let m = &path.slices[k].measure;
        assert!((m.total() - 1.0).abs() < 1e-10);
        for (p, &w) in m.points.iter().zip(&m.weights) {
            let inside = p[0] > 2.0 * t && p[0] < 2.0 * t + 1.0;
            if inside {
                assert!((w / 0.01 - 1.0).abs() < 1e-9, "t={t} x={} w={w}", p[0]);
            } else {
                assert!(w.abs() < 1e-12);
            }
        }
        for a in path.along.as_ref().unwrap() {
            assert!((a[k] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn displacement_contraction_density() {
    let s = ModelSpace::interval(0.0, 2.0);
    let g = Grid1d::new(0.0, 2.0, 400, false);
    let mu = Density1d::uniform(g.clone());
    let nu = Density1d::block(g, 0.0, 1.0);
    let (_, path) = displacement_1d(&s, &mu, &nu, 5).unwrap();
    for (k, &t) in path.t_grid.iter().enumerate() {
        for a in path.along.as_ref().unwrap() {
            assert!(
                (a[k] - 1.0 / (2.0 - t)).abs() < 1e-12,
                "{} {}",
                a[k],
                1.0 / (2.0 - t)
            );
        }
    }
}

#[test]
fn identity_displacement_is_static() {
    let s = ModelSpace::interval(0.0, 1.0);
    let g = Grid1d::new(0.0, 1.0, 100, false);
    let mu = Density1d::bump(g, 0.4, 0.3);
    let (plan, path) = displacement_1d(&s, &mu, &mu, 4).unwrap();
    assert!(plan.w2_squared() < 1e-24);
    for slice in &path.slices {
        for (a, b) in slice.measure.weights.iter().zip(&mu.mass) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn midpoint_property_of_slices() {
    let g = Grid1d::new(-3.0, 3.0, 600, false);
    let s = ModelSpace::interval(-3.0, 3.0);
    let mu = Density1d::bump(g.clone(), -1.0, 0.8);
    let nu = Density1d::block(g.clone(), 0.5, 2.5);
    let (_, path) = displacement_1d(&s, &mu, &nu, 5).unwrap();
    let w = w2_squared_1d(&mu, &nu).sqrt();
    for (k, &t) in path.t_grid.iter().enumerate() {
        let mt = Density1d {
            grid: g.clone(),
            mass: path.slices[k].measure.weights.clone(),
        };
        let wt = w2_squared_1d(&mu, &mt).sqrt();
        assert!((wt - t * w).abs() < g.spacing(), "t={t}: {wt} vs {}", t * w);
    }
}

#[test]
fn discrete_displacement_rejects_split_atoms_without_binning() {
    let s = ModelSpace::sphere2(1.0);
    let n = cdcert::geometry::sphere_point(1.0, 0.5, 0.0);
    let a = cdcert::geometry::sphere_point(1.0, 1.0, 0.3);
    let b = cdcert::geometry::sphere_point(1.0, 1.0, 1.3);
    let plan = TransportPlan {
        sources: vec![n],
        targets: vec![a, b],
        pairs: vec![
            Coupling {
                source: 0,
                target: 0,
                mass: 0.5,
            },
            Coupling {
                source: 0,
                target: 1,
                mass: 0.5,
            },
        ],
        displacements: None,
        cost: 0.0,
    };
    assert!(matches!(
        displacement_path(&plan, &s, 3, SliceMode::Atomic),
        Err(TransportError::NonMapPlan { source_index: 0 })
    ));
    let pieces = decompose_map_like(&plan, SUBPLAN_CAP).unwrap();
    assert_eq!(pieces.len(), 2);
    assert!(pieces.iter().all(TransportPlan::is_map));
    let bins = cdcert::grid::SphereBins {
        radius: 1.0,
        n_polar: 16,
        n_azimuth: 32,
    };
    let (_, path) = displacement_path(&plan, &s, 3, SliceMode::Binned(&bins)).unwrap();
    assert!(path
        .slices
        .iter()
        .all(|sl| (sl.measure.total() - 1.0).abs() < 1e-12));
}

#[test]
fn hopf_lax_of_zero_and_linear() {
    let s = ModelSpace::interval(-5.0, 5.0);
    let pts: Vec<Vec3> = (0..=2000)
        .map(|i| Vec3::new(-5.0 + i as f64 * 0.005, 0.0, 0.0))
        .collect();
    let zero = GridFunction {
        points: pts.clone(),
        values: vec![0.0; pts.len()],
    };
    assert!(hopf_lax(&zero, 1.0, &s)
        .unwrap()
        .values
        .iter()
        .all(|v| v.abs() < 1e-15));
    let lin = GridFunction {
        points: pts.clone(),
        values: pts.iter().map(|p| p[0]).collect(),
    };
    let q = hopf_lax(&lin, 1.0, &s).unwrap();
    for (p, v) in pts.iter().zip(&q.values) {
        // away from the left edge the minimizer y = x − 1 is on the grid
        if p[0] > -3.9 {
            assert!((v - (p[0] - 0.5)).abs() < 1e-10);
        }
    }
    let tiny = hopf_lax(&lin, 1e-6, &s).unwrap();
    for (a, b) in tiny.values.iter().zip(&lin.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn hopf_lax_semigroup_on_grid() {
    let s = ModelSpace::interval(-2.0, 2.0);
    let h = 0.01;
    let pts: Vec<Vec3> = (0..=400)
        .map(|i| Vec3::new(-2.0 + i as f64 * h, 0.0, 0.0))
        .collect();
    let phi = GridFunction {
        points: pts.clone(),
        values: pts.iter().map(|p| (3.0 * p[0]).sin()).collect(),
    };
    let (a, b) = (0.3, 0.5);
    let whole = hopf_lax(&phi, a + b, &s).unwrap();
    let split = hopf_lax(&hopf_lax(&phi, b, &s).unwrap(), a, &s).unwrap();
    for (w, sp) in whole.values.iter().zip(&split.values) {
        assert!(*w >= sp - 2.0 * h * h / b);
    }
}

#[test]
fn kantorovich_translation_potential() {
    let s = ModelSpace::interval(-1.0, 3.0);
    let g = Grid1d::new(-1.0, 3.0, 400, false);
    let mu = Density1d::block(g.clone(), 0.0, 1.0);
    let nu = Density1d::block(g, 1.0, 2.0);
    let phi = kantorovich_potential_1d(&mu, &nu, 4).unwrap();
    // φ' = x − T(x) = −1 on the support of μ
    for w in phi.points.windows(2).zip(phi.values.windows(2)) {
        let (p, v) = w;
        if p[0][0] >= 0.0 && p[1][0] <= 1.0 {
            assert!(((v[1] - v[0]) / (p[1][0] - p[0][0]) + 1.0).abs() < 1e-9);
        }
    }
    let dual = kantorovich_dual_value(&phi, &mu, &nu, &s).unwrap();
    assert!((dual - 1.0).abs() < 1e-6, "{dual}");
}

#[test]
fn kantorovich_duality_gap_for_bumps() {
    let s = ModelSpace::interval(-3.0, 3.0);
    let g = Grid1d::new(-3.0, 3.0, 300, false);
    let mu = Density1d::bump(g.clone(), -1.0, 1.0);
    let nu = Density1d::bump(g, 0.8, 0.6);
    let w2 = w2_squared_1d(&mu, &nu);
    let phi = kantorovich_potential_1d(&mu, &nu, 8).unwrap();
    let dual = kantorovich_dual_value(&phi, &mu, &nu, &s).unwrap();
    assert!((dual - w2).abs() < 1e-6 * (1.0 + w2), "{dual} vs {w2}");
}

#[test]
fn kantorovich_equal_measures() {
    let s = ModelSpace::interval(0.0, 1.0);
    let g = Grid1d::new(0.0, 1.0, 100, false);
    let mu = Density1d::bump(g, 0.5, 0.3);
    let phi = kantorovich_potential_1d(&mu, &mu, 4).unwrap();
    // the potential is pinned only on the support
    for (p, v) in phi.points.iter().zip(&phi.values) {
        if (p[0] - 0.5).abs() < 0.3 {
            assert!((v - phi.values[phi.points.len() / 2]).abs() < 1e-12);
        }
    }
    assert!(kantorovich_dual_value(&phi, &mu, &mu, &s).unwrap().abs() < 1e-10);
}

fn weights(raw: &[f64]) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.iter().map(|w| w / t).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn monotone_agrees_with_exact_on_interval(
        xs in prop::collection::vec(0.0f64..10.0, 1..12),
        ys in prop::collection::vec(0.0f64..10.0, 1..12),
        wa in prop::collection::vec(0.05f64..1.0, 12),
        wb in prop::collection::vec(0.05f64..1.0, 12),
    ) {
        let s = ModelSpace::interval(0.0, 10.0);
        let mu = line(&xs, &weights(&wa[..xs.len()]));
        let nu = line(&ys, &weights(&wb[..ys.len()]));
        let a = ot_1d(&mu, &nu, &s).unwrap();
        let b = ot_exact(&mu, &nu, &s).unwrap();
        prop_assert!((a.cost - b.cost).abs() < 1e-10, "{} vs {}", a.cost, b.cost);
        for (m, w) in a.source_marginal().iter().zip(&mu.weights) {
            prop_assert!((m - w).abs() < 1e-10);
        }
        for (m, w) in b.target_marginal().iter().zip(&nu.weights) {
            prop_assert!((m - w).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_agrees_with_exact_on_circle(
        xs in prop::collection::vec(0.0f64..6.28, 1..10),
        ys in prop::collection::vec(0.0f64..6.28, 1..10),
        wa in prop::collection::vec(0.05f64..1.0, 10),
        wb in prop::collection::vec(0.05f64..1.0, 10),
    ) {
        let s = ModelSpace::circle(2.0 * std::f64::consts::PI);
        let mu = line(&xs, &weights(&wa[..xs.len()]));
        let nu = line(&ys, &weights(&wb[..ys.len()]));
        let a = ot_1d(&mu, &nu, &s).unwrap();
        let b = ot_exact(&mu, &nu, &s).unwrap();
        prop_assert!((a.cost - b.cost).abs() < 1e-10, "{} vs {}", a.cost, b.cost);
    }

    #[test]
    fn w2_triangle_inequality(c in prop::collection::vec(-2.0f64..2.0, 3), w in prop::collection::vec(0.3f64..1.2, 3)) {
        let g = Grid1d::new(-4.0, 4.0, 200, false);
        let d: Vec<Density1d> = (0..3).map(|i| Density1d::bump(g.clone(), c[i], w[i])).collect();
        let w01 = w2_squared_1d(&d[0], &d[1]).sqrt();
        let w12 = w2_squared_1d(&d[1], &d[2]).sqrt();
        let w02 = w2_squared_1d(&d[0], &d[2]).sqrt();
        prop_assert!(w02 <= w01 + w12 + 1e-10);
    }

    #[test]
    fn slices_conserve_mass(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, periodic in any::<bool>()) {
        let (s, g) = if periodic {
            (ModelSpace::circle(4.0), Grid1d::new(0.0, 4.0, 160, true))
        } else {
            (ModelSpace::interval(-2.0, 2.0), Grid1d::new(-2.0, 2.0, 160, false))
        };
        let mu = Density1d::bump(g.clone(), c0, 0.5);
        let nu = Density1d::block(g, c1 - 0.3, c1 + 0.3);
        let (_, path) = displacement_1d(&s, &mu, &nu, 7).unwrap();
        for slice in &path.slices {
            prop_assert!((slice.measure.total() - 1.0).abs() < 1e-10);
        }
    }
}
