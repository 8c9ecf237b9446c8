//! Vector fields, their line integrals and symmetric derivatives, and the
//! Bakry-Émery N-Ricci tensor `Ric − ∇ˢZ − Z⊗Z/(N−n)`.
//!
//! The 1-form is always `α = ⟨Z, ·⟩`; a gradient drift `α = −df` is passed as
//! `Z = −∇f`.

use std::sync::Arc;

use nalgebra::Matrix3;

use crate::distortion::Dimension;
use crate::geometry::{GeodesicPath, ModelSpace, SpaceKind, Vec3};
use crate::par;
use crate::quad::gauss_legendre;

pub type VectorFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vec3) -> Matrix3<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;

/// Central-difference step for `dZ` without an analytic Jacobian.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone)]
pub struct FieldSpec {
    name: String,
    z: VectorFn,
    dz: Option<JacobianFn>,
    /// `V` with `Z = −∇V`, when known
    potential: Option<ScalarFn>,
}

impl std::fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSpec")
            .field("name", &self.name)
            .field("jacobian", &self.dz.is_some())
            .field("potential", &self.potential.is_some())
            .finish()
    }
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, z: VectorFn) -> Self {
        Self {
            name: name.into(),
            z,
            dz: None,
            potential: None,
        }
    }

    pub fn with_jacobian(mut self, dz: JacobianFn) -> Self {
        self.dz = Some(dz);
        self
    }

    pub fn with_potential(mut self, v: ScalarFn) -> Self {
        self.potential = Some(v);
        self
    }

    /// Drops the analytic Jacobian, forcing finite differences.
    pub fn without_jacobian(mut self) -> Self {
        self.dz = None;
        self
    }

    pub fn zero() -> Self {
        Self::new("zero", Arc::new(|_| Vec3::zeros()))
            .with_jacobian(Arc::new(|_| Matrix3::zeros()))
            .with_potential(Arc::new(|_| 0.0))
    }

    /// Constant drift `c` in chart coordinates.
    pub fn constant(c: Vec3) -> Self {
        Self::new("constant-drift", Arc::new(move |_| c))
            .with_jacobian(Arc::new(|_| Matrix3::zeros()))
    }

    /// `Z = −s(x − x0)` on a line, the drift of an Ornstein-Uhlenbeck process.
    pub fn ou(strength: f64, center: f64) -> Self {
        Self::new(
            "ou-drift",
            Arc::new(move |p: &Vec3| Vec3::new(-strength * (p[0] - center), 0.0, 0.0)),
        )
        .with_jacobian(Arc::new(move |_| {
            let mut m = Matrix3::zeros();
            m[(0, 0)] = -strength;
            m
        }))
        .with_potential(Arc::new(move |p: &Vec3| {
            0.5 * strength * (p[0] - center).powi(2)
        }))
    }

    /// `Z = −V'` for the polynomial `V(x) = Σ c_k x^k` on a line.
    pub fn gradient_of_polynomial(coeffs: Vec<f64>) -> Self {
        let c1 = coeffs.clone();
        let c2 = coeffs.clone();
        let c3 = coeffs;
        Self::new(
            "gradient-of-V",
            Arc::new(move |p: &Vec3| Vec3::new(-poly_derivative(&c1, p[0], 1), 0.0, 0.0)),
        )
        .with_jacobian(Arc::new(move |p: &Vec3| {
            let mut m = Matrix3::zeros();
            m[(0, 0)] = -poly_derivative(&c2, p[0], 2);
            m
        }))
        .with_potential(Arc::new(move |p: &Vec3| poly_derivative(&c3, p[0], 0)))
    }

    /// `α · e_z × p` on an embedded sphere: rotation about the polar axis.
    pub fn rotation(alpha: f64) -> Self {
        Self::new(
            "rotation-alpha",
            Arc::new(move |p: &Vec3| Vec3::new(-p[1], p[0], 0.0) * alpha),
        )
        .with_jacobian(Arc::new(move |_| {
            let mut m = Matrix3::zeros();
            m[(0, 1)] = -alpha;
            m[(1, 0)] = alpha;
            m
        }))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let z = self.z.clone();
        let mut out = Self::new(
            format!("{}*{}", factor, self.name),
            Arc::new(move |p| z(p) * factor),
        );
        if let Some(dz) = self.dz.clone() {
            out.dz = Some(Arc::new(move |p| dz(p) * factor));
        }
        if let Some(v) = self.potential.clone() {
            out.potential = Some(Arc::new(move |p| v(p) * factor));
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, p: &Vec3) -> Vec3 {
        (self.z)(p)
    }

    pub fn jacobian(&self, p: &Vec3) -> Option<Matrix3<f64>> {
        self.dz.as_ref().map(|dz| dz(p))
    }

    pub fn potential(&self, p: &Vec3) -> Option<f64> {
        self.potential.as_ref().map(|v| v(p))
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// Directional derivative `∂_v Z` of the chart components.
    pub fn directional_derivative(&self, p: &Vec3, v: &Vec3) -> Vec3 {
        match &self.dz {
            Some(dz) => dz(p) * v,
            None => {
                (self.eval(&(p + v * FD_STEP)) - self.eval(&(p - v * FD_STEP))) / (2.0 * FD_STEP)
            }
        }
    }
}

fn poly_derivative(c: &[f64], x: f64, order: usize) -> f64 {
    let mut s = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(order) {
        let mut fall = 1.0;
        for j in 0..order {
            fall *= (k - j) as f64;
        }
        s += ck * fall * x.powi((k - order) as i32);
    }
    s
}

/// `φ_t(γ) = ∫_0^t ⟨Z(γ(s)), γ̇(s)⟩ ds`.
pub fn line_integral(space: &ModelSpace, geo: &GeodesicPath, field: &FieldSpec, t: f64) -> f64 {
    line_integral_profile(space, geo, field, &[t])[0]
}

/// `φ_t(γ)` at each of the increasing `times`, sharing one sweep over the samples.
pub fn line_integral_profile(
    space: &ModelSpace,
    geo: &GeodesicPath,
    field: &FieldSpec,
    times: &[f64],
) -> Vec<f64> {
    let integrand = |s: f64| {
        let (p, v) = geo.eval(s);
        space.inner(&p, &field.eval(&p), &v)
    };
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut cursor = 0.0;
    let knots: Vec<f64> = geo.samples.iter().map(|s| s.t).collect();
    let mut k = 1;
    for &t in times {
        let t = t.clamp(0.0, 1.0);
        while k < knots.len() && knots[k] <= t {
            if knots[k] > cursor {
                acc += gauss_legendre(cursor, knots[k], integrand);
                cursor = knots[k];
            }
            k += 1;
        }
        if t > cursor {
            acc += gauss_legendre(cursor, t, integrand);
            cursor = t;
        }
        out.push(acc);
    }
    out
}

/// `∇ˢZ(v, v) = ⟨∇_v Z, v⟩`.
pub fn symmetric_derivative(space: &ModelSpace, field: &FieldSpec, x: &Vec3, v: &Vec3) -> f64 {
    match space.kind() {
        SpaceKind::Sphere2 { .. } => {
            let dv = match field.jacobian(x) {
                Some(j) => j * v,
                None => {
                    let speed = v.norm();
                    if speed == 0.0 {
                        return 0.0;
                    }
                    let unit = v / speed;
                    let fwd = space
                        .geodesic_shoot(x, &(unit * FD_STEP), 2)
                        .expect("sphere is complete");
                    let bwd = space
                        .geodesic_shoot(x, &(-unit * FD_STEP), 2)
                        .expect("sphere is complete");
                    (field.eval(&fwd.end()) - field.eval(&bwd.end())) * (speed / (2.0 * FD_STEP))
                }
            };
            dv.dot(v)
        }
        SpaceKind::Warped(_) => {
            let gamma = space.christoffel(x);
            let z = field.eval(x);
            let mut cov = field.directional_derivative(x, v);
            for i in 0..3 {
                cov[i] += v.dot(&(gamma[i] * z));
            }
            space.inner(x, &cov, v)
        }
        _ => field.directional_derivative(x, v).dot(v),
    }
}

/// A lower bound value that may be `−∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RicciValue {
    Finite(f64),
    MinusInfinity,
}

impl RicciValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RicciValue::Finite(x) => Some(x),
            RicciValue::MinusInfinity => None,
        }
    }

    pub fn min(self, other: Self) -> Self {
        match (self, other) {
            (RicciValue::Finite(a), RicciValue::Finite(b)) => RicciValue::Finite(a.min(b)),
            _ => RicciValue::MinusInfinity,
        }
    }

    /// `self >= k`
    pub fn at_least(self, k: f64) -> bool {
        matches!(self, RicciValue::Finite(x) if x >= k)
    }
}

/// `ric^N(v, v)` for any tangent `v` (not normalized).
pub fn bakry_emery_form(
    space: &ModelSpace,
    field: &FieldSpec,
    n: Dimension,
    x: &Vec3,
    v: &Vec3,
) -> RicciValue {
    let dim = space.dim() as f64;
    let base = space.ricci_at(x, v) - symmetric_derivative(space, field, x, v);
    let zv = space.inner(x, &field.eval(x), v);
    match n {
        Dimension::Infinite => RicciValue::Finite(base),
        Dimension::Finite(nn) => {
            if nn < dim - 1e-12 {
                RicciValue::MinusInfinity
            } else if (nn - dim).abs() <= 1e-12 {
                if zv.abs() <= 1e-10 * space.norm(x, v).max(1.0) {
                    RicciValue::Finite(base)
                } else {
                    RicciValue::MinusInfinity
                }
            } else {
                RicciValue::Finite(base - zv * zv / (nn - dim))
            }
        }
    }
}

/// `ric^N(v, v)` for a unit `v`.
pub fn bakry_emery_at(
    space: &ModelSpace,
    field: &FieldSpec,
    n: Dimension,
    x: &Vec3,
    v: &Vec3,
) -> RicciValue {
    bakry_emery_form(space, field, n, x, v)
}

/// The tensor `Ric − ∇ˢZ − Z⊗Z/N'` written with the extra-dimension parameter `N'`,
/// evaluated as `ric^{N'+n}`.
pub fn bakry_emery_excess(
    space: &ModelSpace,
    field: &FieldSpec,
    extra: Dimension,
    x: &Vec3,
    v: &Vec3,
) -> RicciValue {
    let n = match extra {
        Dimension::Finite(e) => Dimension::Finite(e + space.dim() as f64),
        Dimension::Infinite => Dimension::Infinite,
    };
    bakry_emery_form(space, field, n, x, v)
}

#[derive(Clone, Debug)]
pub struct RicciSample {
    pub point: Vec3,
    pub direction: Vec3,
    pub value: RicciValue,
}

#[derive(Clone, Debug)]
pub struct BakryEmeryReport {
    pub samples: Vec<RicciSample>,
    pub inf_estimate: RicciValue,
    pub worst_point: Vec3,
    pub worst_direction: Vec3,
}

impl BakryEmeryReport {
    /// `true` when the scan supports `ric^N ≥ k` up to `tol`.
    pub fn certifies(&self, k: f64, tol: f64) -> bool {
        self.inf_estimate.at_least(k - tol)
    }
}

/// Minimum of `ric^N` over a point grid and a direction fan.
pub fn lower_bound_scan(
    space: &ModelSpace,
    field: &FieldSpec,
    n: Dimension,
    n_points: usize,
    n_dirs: usize,
) -> BakryEmeryReport {
    scan_form(space, n_points, n_dirs, |x, v| {
        bakry_emery_at(space, field, n, x, v)
    })
}

/// Minimum of an arbitrary quadratic form over unit directions.
pub fn scan_form<F>(space: &ModelSpace, n_points: usize, n_dirs: usize, form: F) -> BakryEmeryReport
where
    F: Fn(&Vec3, &Vec3) -> RicciValue + Sync + Send,
{
    let points = space.sample_points(n_points);
    let per_point: Vec<Vec<RicciSample>> = par::map(&points, |x| {
        space
            .unit_directions(x, n_dirs)
            .into_iter()
            .map(|v| RicciSample {
                point: *x,
                direction: v,
                value: form(x, &v),
            })
            .collect()
    });
    let samples: Vec<RicciSample> = per_point.into_iter().flatten().collect();
    let mut worst = 0;
    for (i, s) in samples.iter().enumerate() {
        let better = match (s.value, samples[worst].value) {
            (RicciValue::MinusInfinity, RicciValue::Finite(_)) => true,
            (RicciValue::Finite(a), RicciValue::Finite(b)) => a < b,
            _ => false,
        };
        if better {
            worst = i;
        }
    }
    BakryEmeryReport {
        inf_estimate: samples
            .iter()
            .fold(RicciValue::Finite(f64::INFINITY), |m, s| m.min(s.value)),
        worst_point: samples[worst].point,
        worst_direction: samples[worst].direction,
        samples,
    }
}
