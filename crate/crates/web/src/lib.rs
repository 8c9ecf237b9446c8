//! Browser bindings for three interactive views of `cdcert`.
//!
//! Each export returns a flat `Float64Array` of rows. The plain Rust versions
//! return `Result<_, String>` so that they can be tested off the browser.

use std::f64::consts::PI;

use cdcert::comparison::volume_profile;
use cdcert::distortion::{sigma, tau};
use cdcert::geometry::sphere_point;
use cdcert::semigroup::{build_generator, contraction_check};
use cdcert::{CurvatureDimension, Density1d, ExtendedReal, FieldSpec, Grid1d, ModelSpace, Vec3};
use wasm_bindgen::prelude::*;

/// Rays of the polar quadrature; fewer than the library default to keep the page responsive.
const RAYS: usize = 64;
const MAX_CELLS: usize = 256;

fn finite_or_inf(x: ExtendedReal) -> f64 {
    x.finite().unwrap_or(f64::INFINITY)
}

/// Rows `(t, σ, τ)` for `t` on `samples` points of `[0, 1]`; `+∞` past the blow-up.
pub fn distortion_rows(k: f64, n: f64, theta: f64, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 || samples > 10_000 {
        return Err(format!("samples must lie in [2, 10000], got {samples}"));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(format!("theta must be a non-negative number, got {theta}"));
    }
    let cd = CurvatureDimension::new(k, n).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        out.push(t);
        out.push(finite_or_inf(
            sigma(t, theta, cd).map_err(|e| e.to_string())?,
        ));
        out.push(finite_or_inf(tau(t, theta, cd).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

/// Rows `(r, v(r)/v(R), model ratio)` on the unit sphere with rotation
/// strength `alpha`, around the point at polar angle `polar`, with `R` the
/// largest of `radii` radii up to `π`.
pub fn bishop_gromov_rows(
    alpha: f64,
    polar: f64,
    k: f64,
    n: f64,
    radii: usize,
) -> Result<Vec<f64>, String> {
    if !(2..=64).contains(&radii) {
        return Err(format!("radii must lie in [2, 64], got {radii}"));
    }
    if !(n > 1.0) {
        return Err(format!("N must exceed 1, got {n}"));
    }
    let space = ModelSpace::sphere2(1.0);
    let x0 = sphere_point(1.0, polar.clamp(0.0, PI), 0.0);
    let rs: Vec<f64> = (1..=radii).map(|i| PI * i as f64 / radii as f64).collect();
    let profile = volume_profile(&space, &FieldSpec::rotation(alpha), &x0, &rs, RAYS)
        .map_err(|e| e.to_string())?;
    let big_r = *rs.last().unwrap();
    let v_big = profile.v_at(big_r).map_err(|e| e.to_string())?;
    let model = |r: f64| model_volume(k, n, r);
    let m_big = model(big_r);
    let mut out = Vec::with_capacity(3 * radii);
    for (i, &r) in rs.iter().enumerate() {
        out.push(r);
        out.push(profile.v[i] / v_big);
        out.push(model(r) / m_big);
    }
    Ok(out)
}

/// `∫₀^r sin_{K/(N−1)}(s)^{N−1} ds` by Simpson's rule, clipped at the first zero.
fn model_volume(k: f64, n: f64, r: f64) -> f64 {
    let kappa = k / (n - 1.0);
    let r = if kappa > 0.0 {
        r.min(PI / kappa.sqrt())
    } else {
        r
    };
    let steps = 400;
    let h = r / steps as f64;
    let f = |s: f64| {
        cdcert::distortion::sin_kappa(kappa, s)
            .max(0.0)
            .powf(n - 1.0)
    };
    let mut acc = f(0.0) + f(r);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Rows `(t, W₂², e^{−2Kt} W₂²(0))` for two bumps on the circle of length 2π
/// with constant drift `c`.
pub fn contraction_rows(
    c: f64,
    k: f64,
    shift: f64,
    cells: usize,
    t_max: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    if !(16..=MAX_CELLS).contains(&cells) {
        return Err(format!("cells must lie in [16, {MAX_CELLS}], got {cells}"));
    }
    if !(1..=200).contains(&steps) || !(t_max > 0.0 && t_max <= 20.0) {
        return Err("need 1 to 200 steps and a final time in (0, 20]".into());
    }
    let space = ModelSpace::circle(2.0 * PI);
    let gen = build_generator(&space, &FieldSpec::constant(Vec3::new(c, 0.0, 0.0)), cells)
        .map_err(|e| e.to_string())?;
    let grid: Grid1d = gen.grid.clone();
    let mu = Density1d::bump(grid.clone(), 1.0, 0.6);
    let nu = Density1d::bump(grid, 1.0 + shift, 0.9);
    let times: Vec<f64> = (1..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect();
    let verdict = contraction_check(&gen, &mu, &nu, k, &times).map_err(|e| e.to_string())?;
    Ok(verdict
        .rows
        .iter()
        .flat_map(|r| [r.t, r.value, r.bound])
        .collect())
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = distortionCurves)]
pub fn distortion_curves(k: f64, n: f64, theta: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    js(distortion_rows(k, n, theta, samples))
}

#[wasm_bindgen(js_name = bishopGromovProfile)]
pub fn bishop_gromov_profile(
    alpha: f64,
    polar: f64,
    k: f64,
    n: f64,
    radii: usize,
) -> Result<Vec<f64>, JsError> {
    js(bishop_gromov_rows(alpha, polar, k, n, radii))
}

#[wasm_bindgen(js_name = contractionCurve)]
pub fn contraction_curve(
    c: f64,
    k: f64,
    shift: f64,
    cells: usize,
    t_max: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    js(contraction_rows(c, k, shift, cells, t_max, steps))
}
