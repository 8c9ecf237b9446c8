use std::f64::consts::PI;

use cdcert_web::{bishop_gromov_rows, contraction_rows, distortion_rows};

#[test]
fn flat_distortion_is_linear() {
    let rows = distortion_rows(0.0, 3.0, 2.0, 11).unwrap();
    assert_eq!(rows.len(), 33);
    for r in rows.chunks(3) {
        assert_eq!(r[1], r[0]);
        assert!((r[2] - r[0]).abs() < 1e-12);
    }
}

#[test]
fn distortion_blows_up_past_the_threshold() {
    // K = 1, N = 2: sigma is infinite once theta reaches pi*sqrt(2)
    let past = distortion_rows(1.0, 2.0, PI * 2f64.sqrt() + 0.01, 5).unwrap();
    assert!(past.chunks(3).skip(1).all(|r| r[1].is_infinite()));
    let before = distortion_rows(1.0, 2.0, 2.0, 5).unwrap();
    for r in before.chunks(3) {
        assert!(r[1].is_finite() && r[1] <= r[2] + 1e-12, "{r:?}");
    }
}

#[test]
fn distortion_rejects_bad_input() {
    assert!(distortion_rows(1.0, 3.0, -1.0, 10).is_err());
    assert!(distortion_rows(1.0, 3.0, 1.0, 1).is_err());
    assert!(distortion_rows(1.0, 0.0, 1.0, 10).is_err());
}

#[test]
fn round_sphere_matches_the_model() {
    let rows = bishop_gromov_rows(0.0, 1.0, 1.0, 2.0, 12).unwrap();
    for r in rows.chunks(3) {
        let exact = (1.0 - r[0].cos()) / 2.0;
        assert!((r[1] - exact).abs() < 1e-6, "{r:?}");
        assert!((r[2] - exact).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn rotation_keeps_the_ratio_above_a_lower_curvature_model() {
    let rows = bishop_gromov_rows(0.3, 1.2, 0.9, 3.0, 16).unwrap();
    for r in rows.chunks(3) {
        assert!(r[1] >= r[2] - 1e-6, "{r:?}");
    }
    assert!(bishop_gromov_rows(0.3, 1.2, 0.9, 1.0, 16).is_err());
}

#[test]
fn drifted_circle_contracts_at_zero_curvature() {
    let rows = contraction_rows(0.5, 0.0, 1.5, 64, 1.0, 10).unwrap();
    assert_eq!(rows.len(), 30);
    for r in rows.chunks(3) {
        assert!(r[1] <= r[2] * (1.0 + 1e-3), "{r:?}");
    }
    assert!(contraction_rows(0.5, 0.0, 1.5, 8, 1.0, 10).is_err());
    assert!(contraction_rows(0.5, 0.0, 1.5, 64, -1.0, 10).is_err());
}
