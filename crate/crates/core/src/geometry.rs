//! Model Riemannian spaces: geodesics, distances, curvature and the matrix Jacobi equation.
//!
//! Points and tangent vectors live in a [`Vec3`]; components past the ambient
//! dimension of the model are zero. `Sphere2` uses its embedding in ℝ³ (so the
//! poles need no special casing), every other kind uses chart coordinates.
//! Periodic coordinates are stored unwrapped along a geodesic.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Weight = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
pub type WarpFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Polar caps excluded from the warped fiber's polar chart.
pub const POLE_EXCLUSION: f64 = 1e-6;
const RK4_MIN_STEPS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("geodesic leaves the coordinate domain at t = {t}")]
    LeavesChart { t: f64 },
    #[error("conjugate point: det of the Jacobi matrix vanishes near t = {t}")]
    ConjugatePoint { t: f64 },
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Warping function `f` of a warped product, with first and second derivatives.
#[derive(Clone)]
pub enum WarpFunction {
    Constant(f64),
    /// `c · sin(r)`
    ScaledSine(f64),
    /// returns `[f, f', f'']`
    Custom(WarpFn),
}

impl WarpFunction {
    pub fn eval(&self, r: f64) -> [f64; 3] {
        match self {
            WarpFunction::Constant(c) => [*c, 0.0, 0.0],
            WarpFunction::ScaledSine(c) => [c * r.sin(), c * r.cos(), -c * r.sin()],
            WarpFunction::Custom(f) => f(r),
        }
    }
}

impl std::fmt::Debug for WarpFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WarpFunction::Constant(c) => write!(f, "Constant({c})"),
            WarpFunction::ScaledSine(c) => write!(f, "ScaledSine({c})"),
            WarpFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fiber {
    /// coordinate θ ∈ [0, L)
    Circle { circumference: f64 },
    /// polar chart (a, b), a ∈ (0, π), b ∈ [0, 2π)
    Sphere2 { radius: f64 },
}

impl Fiber {
    pub fn dim(&self) -> usize {
        match self {
            Fiber::Circle { .. } => 1,
            Fiber::Sphere2 { .. } => 2,
        }
    }

    /// Diagonal of the fiber metric at fiber coordinates `(u1, u2)`.
    fn metric_diag(&self, u1: f64) -> [f64; 2] {
        match *self {
            Fiber::Circle { .. } => [1.0, 0.0],
            Fiber::Sphere2 { radius } => {
                let r2 = radius * radius;
                [r2, r2 * u1.sin().powi(2)]
            }
        }
    }

    /// Constant sectional curvature of the fiber.
    pub fn curvature(&self) -> f64 {
        match *self {
            Fiber::Circle { .. } => 0.0,
            Fiber::Sphere2 { radius } => 1.0 / (radius * radius),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Fiber::Circle { circumference } => circumference / 2.0,
            Fiber::Sphere2 { radius } => PI * radius,
        }
    }

    pub fn distance(&self, u: [f64; 2], w: [f64; 2]) -> f64 {
        match *self {
            Fiber::Circle { circumference } => periodic_gap(u[0], w[0], circumference),
            Fiber::Sphere2 { radius } => {
                let p = sphere_point(1.0, u[0], u[1]);
                let q = sphere_point(1.0, w[0], w[1]);
                radius * angle_between(&p, &q)
            }
        }
    }

    pub fn as_space(&self) -> ModelSpace {
        match *self {
            Fiber::Circle { circumference } => ModelSpace::circle(circumference),
            Fiber::Sphere2 { radius } => ModelSpace::sphere2(radius),
        }
    }
}

/// Chart data of `B ×_f F` with a one-dimensional base interval.
#[derive(Clone, Debug)]
pub struct WarpedChart {
    pub base: (f64, f64),
    pub warp: WarpFunction,
    pub fiber: Fiber,
}

impl WarpedChart {
    fn fiber_coords(p: &Vec3) -> [f64; 2] {
        [p[1], p[2]]
    }

    /// `(f, f', f'')` at the base coordinate of `p`.
    pub fn warp_at(&self, p: &Vec3) -> [f64; 3] {
        self.warp.eval(p[0])
    }

    /// Orthonormal-frame components of a chart vector.
    fn orthonormal_components(&self, p: &Vec3, v: &Vec3) -> Vec3 {
        let f = self.warp_at(p)[0];
        let h = self.fiber.metric_diag(p[1]);
        let mut out = Vec3::zeros();
        out[0] = v[0];
        out[1] = f * h[0].sqrt() * v[1];
        if self.fiber.dim() == 2 {
            out[2] = f * h[1].sqrt() * v[2];
        }
        out
    }

    /// Sectional curvature of the coordinate plane `(a, b)`.
    fn plane_curvature(&self, p: &Vec3, a: usize, b: usize) -> f64 {
        let [f, df, ddf] = self.warp_at(p);
        if a == 0 || b == 0 {
            -ddf / f
        } else {
            (self.fiber.curvature() - df * df) / (f * f)
        }
    }
}

#[derive(Clone, Debug)]
pub enum SpaceKind {
    Interval { lo: f64, hi: f64 },
    Circle { circumference: f64 },
    Sphere2 { radius: f64 },
    FlatTorus2 { lx: f64, ly: f64 },
    Warped(WarpedChart),
}

/// A model space with an optional density of the reference measure against
/// Riemannian volume.
#[derive(Clone)]
pub struct ModelSpace {
    kind: SpaceKind,
    weight: Option<Weight>,
}

impl std::fmt::Debug for ModelSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpace")
            .field("kind", &self.kind)
            .field("weighted", &self.weight.is_some())
            .finish()
    }
}

impl ModelSpace {
    pub fn interval(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "empty interval");
        Self::from_kind(SpaceKind::Interval { lo, hi })
    }

    pub fn circle(circumference: f64) -> Self {
        assert!(circumference > 0.0);
        Self::from_kind(SpaceKind::Circle { circumference })
    }

    pub fn sphere2(radius: f64) -> Self {
        assert!(radius > 0.0);
        Self::from_kind(SpaceKind::Sphere2 { radius })
    }

    pub fn flat_torus(lx: f64, ly: f64) -> Self {
        assert!(lx > 0.0 && ly > 0.0);
        Self::from_kind(SpaceKind::FlatTorus2 { lx, ly })
    }

    pub fn warped(chart: WarpedChart) -> Self {
        Self::from_kind(SpaceKind::Warped(chart))
    }

    pub fn from_kind(kind: SpaceKind) -> Self {
        Self { kind, weight: None }
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn weight_at(&self, p: &Vec3) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w(p))
    }

    pub fn is_weighted(&self) -> bool {
        self.weight.is_some()
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Interval { .. } | SpaceKind::Circle { .. } => 1,
            SpaceKind::Sphere2 { .. } | SpaceKind::FlatTorus2 { .. } => 2,
            SpaceKind::Warped(w) => 1 + w.fiber.dim(),
        }
    }

    /// Number of meaningful components in a point.
    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Sphere2 { .. } => 3,
            _ => self.dim(),
        }
    }

    pub fn is_one_dimensional(&self) -> bool {
        matches!(
            self.kind,
            SpaceKind::Interval { .. } | SpaceKind::Circle { .. }
        )
    }

    pub fn is_flat(&self) -> bool {
        matches!(
            self.kind,
            SpaceKind::Interval { .. } | SpaceKind::Circle { .. } | SpaceKind::FlatTorus2 { .. }
        )
    }

    /// Reduce periodic coordinates to their fundamental domain.
    pub fn wrap(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        match &self.kind {
            SpaceKind::Circle { circumference } => q[0] = q[0].rem_euclid(*circumference),
            SpaceKind::FlatTorus2 { lx, ly } => {
                q[0] = q[0].rem_euclid(*lx);
                q[1] = q[1].rem_euclid(*ly);
            }
            SpaceKind::Warped(w) => match w.fiber {
                Fiber::Circle { circumference } => q[1] = q[1].rem_euclid(circumference),
                Fiber::Sphere2 { .. } => q[2] = q[2].rem_euclid(2.0 * PI),
            },
            SpaceKind::Sphere2 { radius } => q = q * (*radius / q.norm()),
            SpaceKind::Interval { .. } => {}
        }
        q
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        const SLACK: f64 = 1e-12;
        match &self.kind {
            SpaceKind::Interval { lo, hi } => p[0] >= lo - SLACK && p[0] <= hi + SLACK,
            SpaceKind::Circle { .. } | SpaceKind::FlatTorus2 { .. } => true,
            SpaceKind::Sphere2 { radius } => (p.norm() - radius).abs() <= 1e-9 * radius,
            SpaceKind::Warped(w) => {
                let inside_base = p[0] > w.base.0 - SLACK && p[0] < w.base.1 + SLACK;
                let inside_fiber = match w.fiber {
                    Fiber::Circle { .. } => true,
                    Fiber::Sphere2 { .. } => p[1] > POLE_EXCLUSION && p[1] < PI - POLE_EXCLUSION,
                };
                inside_base && inside_fiber
            }
        }
    }

    /// Chart metric at `p`, a `dim × dim` matrix. `Sphere2` reports its polar chart.
    pub fn metric(&self, p: &Vec3) -> DMatrix<f64> {
        let n = self.dim();
        match &self.kind {
            SpaceKind::Sphere2 { radius } => {
                let (polar, _) = sphere_chart(p);
                let r2 = radius * radius;
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    r2,
                    r2 * polar.sin().powi(2),
                ]))
            }
            _ => self.chart_metric(p).view((0, 0), (n, n)).into_owned(),
        }
    }

    /// Chart metric padded to 3×3 with the identity; `Sphere2` gets the Euclidean metric.
    pub fn chart_metric(&self, p: &Vec3) -> Matrix3<f64> {
        match &self.kind {
            SpaceKind::Warped(w) => {
                let f = w.warp_at(p)[0];
                let h = w.fiber.metric_diag(p[1]);
                let mut g = Matrix3::identity();
                g[(1, 1)] = f * f * h[0];
                if w.fiber.dim() == 2 {
                    g[(2, 2)] = f * f * h[1];
                }
                g
            }
            _ => Matrix3::identity(),
        }
    }

    pub fn inner(&self, p: &Vec3, u: &Vec3, v: &Vec3) -> f64 {
        match &self.kind {
            SpaceKind::Warped(_) => u.dot(&(self.chart_metric(p) * v)),
            _ => u.dot(v),
        }
    }

    pub fn norm(&self, p: &Vec3, v: &Vec3) -> f64 {
        self.inner(p, v, v).max(0.0).sqrt()
    }

    /// Tangential part of an ambient vector (identity except on `Sphere2`).
    pub fn project_tangent(&self, p: &Vec3, v: &Vec3) -> Vec3 {
        match &self.kind {
            SpaceKind::Sphere2 { .. } => {
                let n = p.normalize();
                v - n * n.dot(v)
            }
            _ => *v,
        }
    }

    /// Orthonormal basis of the tangent space at `p`.
    pub fn tangent_basis(&self, p: &Vec3) -> Vec<Vec3> {
        match &self.kind {
            SpaceKind::Interval { .. } | SpaceKind::Circle { .. } => vec![Vec3::x()],
            SpaceKind::FlatTorus2 { .. } => vec![Vec3::x(), Vec3::y()],
            SpaceKind::Sphere2 { .. } => {
                let n = p.normalize();
                let axis = Vec3::z().cross(&n);
                let e1 = if axis.norm() > 1e-9 {
                    axis.normalize()
                } else {
                    Vec3::x()
                };
                let e2 = n.cross(&e1);
                vec![e1, e2]
            }
            SpaceKind::Warped(w) => {
                let f = w.warp_at(p)[0];
                let h = w.fiber.metric_diag(p[1]);
                let mut basis = vec![Vec3::x(), Vec3::y() / (f * h[0].sqrt())];
                if w.fiber.dim() == 2 {
                    basis.push(Vec3::z() / (f * h[1].sqrt()));
                }
                basis
            }
        }
    }

    /// A fan of `n` unit directions at `p`. Quadratic forms only need a half fan.
    pub fn unit_directions(&self, p: &Vec3, n: usize) -> Vec<Vec3> {
        let basis = self.tangent_basis(p);
        let n = n.max(1);
        match basis.len() {
            1 => vec![basis[0]],
            2 => (0..n)
                .map(|k| {
                    let a = PI * k as f64 / n as f64;
                    basis[0] * a.cos() + basis[1] * a.sin()
                })
                .collect(),
            _ => fibonacci_hemisphere(n)
                .into_iter()
                .map(|d| basis[0] * d[0] + basis[1] * d[1] + basis[2] * d[2])
                .collect(),
        }
    }

    /// Quasi-uniform sample points.
    pub fn sample_points(&self, n: usize) -> Vec<Vec3> {
        let n = n.max(1);
        match &self.kind {
            SpaceKind::Interval { lo, hi } => {
                if n == 1 {
                    return vec![Vec3::new(0.5 * (lo + hi), 0.0, 0.0)];
                }
                (0..n)
                    .map(|i| Vec3::new(lo + (hi - lo) * i as f64 / (n - 1) as f64, 0.0, 0.0))
                    .collect()
            }
            SpaceKind::Circle { circumference } => (0..n)
                .map(|i| Vec3::new(circumference * i as f64 / n as f64, 0.0, 0.0))
                .collect(),
            SpaceKind::FlatTorus2 { lx, ly } => {
                let side = (n as f64).sqrt().ceil() as usize;
                let mut pts = Vec::with_capacity(side * side);
                for i in 0..side {
                    for j in 0..side {
                        pts.push(Vec3::new(
                            lx * i as f64 / side as f64,
                            ly * j as f64 / side as f64,
                            0.0,
                        ));
                    }
                }
                pts
            }
            SpaceKind::Sphere2 { radius } => fibonacci_sphere(n)
                .into_iter()
                .map(|p| p * *radius)
                .collect(),
            SpaceKind::Warped(w) => {
                let margin = 0.05 * (w.base.1 - w.base.0);
                let per_axis = match w.fiber.dim() {
                    1 => (n as f64).sqrt().ceil() as usize,
                    _ => (n as f64).cbrt().ceil() as usize,
                }
                .max(2);
                let rs = linspace(w.base.0 + margin, w.base.1 - margin, per_axis);
                let mut pts = Vec::new();
                match w.fiber {
                    Fiber::Circle { circumference } => {
                        for &r in &rs {
                            for j in 0..per_axis {
                                let th = circumference * j as f64 / per_axis as f64;
                                pts.push(Vec3::new(r, th, 0.0));
                            }
                        }
                    }
                    Fiber::Sphere2 { .. } => {
                        let polars = linspace(0.05, PI - 0.05, per_axis);
                        for &r in &rs {
                            for &a in &polars {
                                for j in 0..per_axis {
                                    let b = 2.0 * PI * j as f64 / per_axis as f64;
                                    pts.push(Vec3::new(r, a, b));
                                }
                            }
                        }
                    }
                }
                pts
            }
        }
    }

    /// Christoffel symbols `Γ^i_{jk}` as `out[i][(j, k)]` in chart coordinates.
    ///
    /// Flat kinds and `Sphere2` (embedded) return zeros.
    pub fn christoffel(&self, p: &Vec3) -> [Matrix3<f64>; 3] {
        let mut out = [Matrix3::zeros(); 3];
        if let SpaceKind::Warped(w) = &self.kind {
            let [f, df, _] = w.warp_at(p);
            let h = w.fiber.metric_diag(p[1]);
            let fiber_dim = w.fiber.dim();
            for i in 0..fiber_dim {
                out[0][(i + 1, i + 1)] = -f * df * h[i];
                out[i + 1][(0, i + 1)] = df / f;
                out[i + 1][(i + 1, 0)] = df / f;
            }
            if let Fiber::Sphere2 { .. } = w.fiber {
                let a = p[1];
                out[1][(2, 2)] = -a.sin() * a.cos();
                out[2][(1, 2)] = a.cos() / a.sin();
                out[2][(2, 1)] = a.cos() / a.sin();
            }
        }
        out
    }

    /// Christoffel symbols by central differences of the chart metric.
    pub fn christoffel_fd(&self, p: &Vec3) -> [Matrix3<f64>; 3] {
        let n = self.dim();
        let h = 1e-5;
        let mut dg = [Matrix3::zeros(); 3];
        for (l, dgl) in dg.iter_mut().enumerate().take(n) {
            let mut e = Vec3::zeros();
            e[l] = h;
            *dgl = (self.chart_metric(&(p + e)) - self.chart_metric(&(p - e))) / (2.0 * h);
        }
        let ginv = self
            .chart_metric(p)
            .try_inverse()
            .expect("metric is positive definite");
        let mut out = [Matrix3::zeros(); 3];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    out[i][(j, k)] = 0.5 * s;
                }
            }
        }
        out
    }

    /// `R(x, y)y` contracted with `w`, i.e. `⟨R(x,y)y, w⟩`, from closed forms.
    pub fn curvature_form(&self, p: &Vec3, x: &Vec3, y: &Vec3, w: &Vec3) -> f64 {
        match &self.kind {
            SpaceKind::Interval { .. }
            | SpaceKind::Circle { .. }
            | SpaceKind::FlatTorus2 { .. } => 0.0,
            SpaceKind::Sphere2 { radius } => {
                (y.dot(y) * x.dot(w) - x.dot(y) * y.dot(w)) / (radius * radius)
            }
            SpaceKind::Warped(chart) => {
                let xo = chart.orthonormal_components(p, x);
                let yo = chart.orthonormal_components(p, y);
                let wo = chart.orthonormal_components(p, w);
                let n = self.dim();
                let mut s = 0.0;
                for a in 0..n {
                    for b in (a + 1)..n {
                        let xy = xo[a] * yo[b] - xo[b] * yo[a];
                        let wy = wo[a] * yo[b] - wo[b] * yo[a];
                        s += chart.plane_curvature(p, a, b) * xy * wy;
                    }
                }
                s
            }
        }
    }

    /// `⟨R(x,y)y, w⟩` from a finite-difference Riemann tensor of the chart metric.
    pub fn curvature_form_fd(&self, p: &Vec3, x: &Vec3, y: &Vec3, w: &Vec3) -> f64 {
        let n = self.dim();
        let h = 1e-4;
        let gamma = self.christoffel_fd(p);
        let mut dgamma = [[Matrix3::zeros(); 3]; 3];
        for (l, slot) in dgamma.iter_mut().enumerate().take(n) {
            let mut e = Vec3::zeros();
            e[l] = h;
            let plus = self.christoffel_fd(&(p + e));
            let minus = self.christoffel_fd(&(p - e));
            for i in 0..n {
                slot[i] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km}Γ^m_{lj} − Γ^i_{lm}Γ^m_{kj},
        // R(X,Y)Z = R^i_{jkl} Z^j X^k Y^l.
        let g = self.chart_metric(p);
        let mut rxyy = Vec3::zeros();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = dgamma[k][i][(l, j)] - dgamma[l][i][(k, j)];
                        for m in 0..n {
                            r += gamma[i][(k, m)] * gamma[m][(l, j)]
                                - gamma[i][(l, m)] * gamma[m][(k, j)];
                        }
                        s += r * y[j] * x[k] * y[l];
                    }
                }
            }
            rxyy[i] = s;
        }
        w.dot(&(g * rxyy))
    }

    /// `Ric(v, v)` from closed forms.
    pub fn ricci_at(&self, p: &Vec3, v: &Vec3) -> f64 {
        match &self.kind {
            SpaceKind::Interval { .. }
            | SpaceKind::Circle { .. }
            | SpaceKind::FlatTorus2 { .. } => 0.0,
            SpaceKind::Sphere2 { radius } => {
                let vt = self.project_tangent(p, v);
                vt.dot(&vt) / (radius * radius)
            }
            SpaceKind::Warped(w) => {
                let [f, df, ddf] = w.warp_at(p);
                let k = w.fiber.dim() as f64;
                let h = w.fiber.metric_diag(p[1]);
                let mut fiber_sq = 0.0;
                for i in 0..w.fiber.dim() {
                    fiber_sq += h[i] * v[i + 1] * v[i + 1];
                }
                let ric_fiber = (k - 1.0) * w.fiber.curvature() * fiber_sq;
                let fiber_c = f * f * fiber_sq;
                -k * ddf / f * v[0] * v[0] + ric_fiber
                    - (ddf / f + (k - 1.0) * df * df / (f * f)) * fiber_c
            }
        }
    }

    /// `Ric(v, v)` by tracing the finite-difference curvature tensor.
    pub fn ricci_fd(&self, p: &Vec3, v: &Vec3) -> f64 {
        self.tangent_basis(p)
            .iter()
            .map(|e| self.curvature_form_fd(p, e, v, e))
            .sum()
    }

    /// Closed-form geodesic distance.
    pub fn distance(&self, x: &Vec3, y: &Vec3) -> Result<f64, GeometryError> {
        Ok(match &self.kind {
            SpaceKind::Interval { .. } => (x[0] - y[0]).abs(),
            SpaceKind::Circle { circumference } => periodic_gap(x[0], y[0], *circumference),
            SpaceKind::FlatTorus2 { lx, ly } => {
                periodic_gap(x[0], y[0], *lx).hypot(periodic_gap(x[1], y[1], *ly))
            }
            SpaceKind::Sphere2 { radius } => radius * angle_between(x, y),
            SpaceKind::Warped(w) => {
                let dfib = w
                    .fiber
                    .distance(WarpedChart::fiber_coords(x), WarpedChart::fiber_coords(y));
                match w.warp {
                    WarpFunction::Constant(c) => (x[0] - y[0]).hypot(c * dfib),
                    WarpFunction::ScaledSine(c) => {
                        let ang = (c * dfib).min(PI);
                        let cos_d = x[0].cos() * y[0].cos() + x[0].sin() * y[0].sin() * ang.cos();
                        cos_d.clamp(-1.0, 1.0).acos()
                    }
                    WarpFunction::Custom(_) => {
                        return Err(GeometryError::Unsupported(
                            "distance on a warped product with a custom warp",
                        ))
                    }
                }
            }
        })
    }

    /// Closed-form diameter.
    pub fn diameter(&self) -> Option<f64> {
        match &self.kind {
            SpaceKind::Interval { lo, hi } => Some(hi - lo),
            SpaceKind::Circle { circumference } => Some(circumference / 2.0),
            SpaceKind::FlatTorus2 { lx, ly } => Some((lx / 2.0).hypot(ly / 2.0)),
            SpaceKind::Sphere2 { radius } => Some(PI * radius),
            SpaceKind::Warped(w) => match w.warp {
                WarpFunction::Constant(c) => {
                    Some((w.base.1 - w.base.0).hypot(c * w.fiber.diameter()))
                }
                WarpFunction::ScaledSine(_) if w.base.0 <= 0.0 && w.base.1 >= PI => Some(PI),
                _ => None,
            },
        }
    }

    /// Initial velocity of the minimizing geodesic from `x` to `y`.
    pub fn log_map(&self, x: &Vec3, y: &Vec3) -> Result<Vec3, GeometryError> {
        Ok(match &self.kind {
            SpaceKind::Interval { .. } => Vec3::new(y[0] - x[0], 0.0, 0.0),
            SpaceKind::Circle { circumference } => {
                Vec3::new(signed_gap(x[0], y[0], *circumference), 0.0, 0.0)
            }
            SpaceKind::FlatTorus2 { lx, ly } => Vec3::new(
                signed_gap(x[0], y[0], *lx),
                signed_gap(x[1], y[1], *ly),
                0.0,
            ),
            SpaceKind::Sphere2 { radius } => {
                let ang = angle_between(x, y);
                let dir = y - x * (x.dot(y) / x.dot(x));
                if dir.norm() < 1e-15 {
                    if ang < 1e-12 {
                        Vec3::zeros()
                    } else {
                        return Err(GeometryError::InvalidParameter(
                            "antipodal points have no unique geodesic".into(),
                        ));
                    }
                } else {
                    dir.normalize() * (radius * ang)
                }
            }
            SpaceKind::Warped(_) => {
                return Err(GeometryError::Unsupported("log map on a warped product"))
            }
        })
    }

    /// Constant-speed geodesic `t ↦ exp_x(tv)` sampled at `n_steps + 1` uniform times.
    pub fn geodesic_shoot(
        &self,
        x: &Vec3,
        v: &Vec3,
        n_steps: usize,
    ) -> Result<GeodesicPath, GeometryError> {
        let n_steps = n_steps.max(2);
        let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 / n_steps as f64).collect();
        let samples = match &self.kind {
            SpaceKind::Interval { lo, hi } => {
                let end = x[0] + v[0];
                if end < lo - 1e-12 || end > hi + 1e-12 {
                    let bound = if end < *lo { *lo } else { *hi };
                    return Err(GeometryError::LeavesChart {
                        t: (bound - x[0]) / v[0],
                    });
                }
                linear_samples(x, v, &times)
            }
            SpaceKind::Circle { .. } | SpaceKind::FlatTorus2 { .. } => linear_samples(x, v, &times),
            SpaceKind::Sphere2 { radius } => {
                let base = x * (*radius / x.norm());
                let vt = self.project_tangent(&base, v);
                let w = vt.norm() / radius;
                times
                    .iter()
                    .map(|&t| {
                        if w == 0.0 {
                            return GeodesicSample {
                                t,
                                point: base,
                                velocity: Vec3::zeros(),
                            };
                        }
                        let (s, c) = (w * t).sin_cos();
                        GeodesicSample {
                            t,
                            point: base * c + vt * (s / w),
                            velocity: vt * c - base * (w * s),
                        }
                    })
                    .collect()
            }
            SpaceKind::Warped(_) => self.chart_geodesic(x, v, n_steps)?,
        };
        let speed = self.norm(&samples[0].point, &samples[0].velocity);
        Ok(GeodesicPath { samples, speed })
    }

    fn geodesic_rhs(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        let gamma = self.christoffel(x);
        Vec3::new(
            -v.dot(&(gamma[0] * v)),
            -v.dot(&(gamma[1] * v)),
            -v.dot(&(gamma[2] * v)),
        )
    }

    fn chart_geodesic(
        &self,
        x: &Vec3,
        v: &Vec3,
        n_steps: usize,
    ) -> Result<Vec<GeodesicSample>, GeometryError> {
        let sub = RK4_MIN_STEPS.div_ceil(n_steps).max(1);
        let h = 1.0 / (n_steps * sub) as f64;
        let mut p = *x;
        let mut q = *v;
        let mut out = vec![GeodesicSample {
            t: 0.0,
            point: p,
            velocity: q,
        }];
        for i in 0..n_steps {
            for j in 0..sub {
                let k1x = q;
                let k1v = self.geodesic_rhs(&p, &q);
                let k2x = q + k1v * (h / 2.0);
                let k2v = self.geodesic_rhs(&(p + k1x * (h / 2.0)), &k2x);
                let k3x = q + k2v * (h / 2.0);
                let k3v = self.geodesic_rhs(&(p + k2x * (h / 2.0)), &k3x);
                let k4x = q + k3v * h;
                let k4v = self.geodesic_rhs(&(p + k3x * h), &k4x);
                p += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
                q += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
                if !self.contains(&p) {
                    return Err(GeometryError::LeavesChart {
                        t: (i * sub + j + 1) as f64 * h,
                    });
                }
            }
            out.push(GeodesicSample {
                t: (i + 1) as f64 / n_steps as f64,
                point: p,
                velocity: q,
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: Vec3,
    pub velocity: Vec3,
}

/// A sampled constant-speed geodesic on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub speed: f64,
}

impl GeodesicPath {
    /// Straight segment `x + t(y - x)`, exact for flat kinds.
    pub fn segment(x: &Vec3, y: &Vec3, n_steps: usize) -> Self {
        let v = y - x;
        let times: Vec<f64> = (0..=n_steps.max(2))
            .map(|i| i as f64 / n_steps.max(2) as f64)
            .collect();
        let samples = linear_samples(x, &v, &times);
        GeodesicPath {
            samples,
            speed: v.norm(),
        }
    }

    pub fn start(&self) -> Vec3 {
        self.samples[0].point
    }

    pub fn end(&self) -> Vec3 {
        self.samples[self.samples.len() - 1].point
    }

    pub fn initial_velocity(&self) -> Vec3 {
        self.samples[0].velocity
    }

    /// Point and velocity at time `s` by cubic Hermite interpolation of the samples.
    pub fn eval(&self, s: f64) -> (Vec3, Vec3) {
        let n = self.samples.len() - 1;
        let s = s.clamp(0.0, 1.0);
        let mut i = ((s * n as f64).floor() as usize).min(n - 1);
        while i > 0 && self.samples[i].t > s {
            i -= 1;
        }
        while i + 1 < n && self.samples[i + 1].t < s {
            i += 1;
        }
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let dt = b.t - a.t;
        let u = (s - a.t) / dt;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let p = a.point * h00 + a.velocity * (h10 * dt) + b.point * h01 + b.velocity * (h11 * dt);
        let d00 = 6.0 * u2 - 6.0 * u;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        let v = (a.point * d00 + b.point * d01) / dt + a.velocity * d10 + b.velocity * d11;
        (p, v)
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| GeodesicSample {
                t: 1.0 - s.t,
                point: s.point,
                velocity: -s.velocity,
            })
            .collect();
        GeodesicPath {
            samples,
            speed: self.speed,
        }
    }

    /// Maximum relative deviation of `|γ̇|` from the recorded speed.
    pub fn speed_drift(&self, space: &ModelSpace) -> f64 {
        let scale = self.speed.max(1e-300);
        self.samples
            .iter()
            .map(|s| (space.norm(&s.point, &s.velocity) - self.speed).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Solution of the matrix Jacobi equation `A'' + R(t)A = 0` in a parallel
/// orthonormal frame whose first vector is the direction of motion.
#[derive(Clone, Debug)]
pub struct JacobiMatrixPath {
    pub t: Vec<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub a_prime: Vec<DMatrix<f64>>,
    pub u: Vec<DMatrix<f64>>,
    /// `y_t = log det A_t`
    pub detlog: Vec<f64>,
    /// `Ric(γ̇, γ̇) = tr R(t)`
    pub ricci: Vec<f64>,
    /// `λ_t = ∫_0^t u_11`, integrated together with `A`
    pub motion: Vec<f64>,
}

impl JacobiMatrixPath {
    /// `λ_t = ∫_0^t u_11`, the log-stretch along the direction of motion.
    pub fn motion_log(&self) -> Vec<f64> {
        self.motion.clone()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates the Jacobi equation along `geo` with data `(A0, A0')` given in the
/// adapted parallel frame. Stored at the sample times of `geo`.
pub fn jacobi_evolve(
    space: &ModelSpace,
    geo: &GeodesicPath,
    a0: &DMatrix<f64>,
    a0_prime: &DMatrix<f64>,
) -> Result<JacobiMatrixPath, GeometryError> {
    let n = space.dim();
    if a0.nrows() != n || a0.ncols() != n || a0_prime.nrows() != n || a0_prime.ncols() != n {
        return Err(GeometryError::InvalidParameter(format!(
            "Jacobi data must be {n}x{n}"
        )));
    }
    let n_out = geo.samples.len() - 1;
    let sub = RK4_MIN_STEPS.div_ceil(n_out).max(1);
    let total = n_out * sub;
    let curvature = curvature_along(space, geo, 2 * total)?;
    let h = 1.0 / total as f64;

    let mut a = a0.clone();
    let mut ap = a0_prime.clone();
    let d0 = a.determinant();
    if d0 <= 0.0 {
        return Err(GeometryError::InvalidParameter(
            "A0 must have positive determinant".into(),
        ));
    }
    let mut out = JacobiMatrixPath {
        t: Vec::with_capacity(n_out + 1),
        a: Vec::new(),
        a_prime: Vec::new(),
        u: Vec::new(),
        detlog: Vec::new(),
        ricci: Vec::new(),
        motion: Vec::new(),
    };
    let u11 = |a: &DMatrix<f64>, ap: &DMatrix<f64>| -> f64 {
        a.clone()
            .try_inverse()
            .map_or(f64::NAN, |inv| (ap * inv)[(0, 0)])
    };
    let mut lambda = 0.0;
    let record = |out: &mut JacobiMatrixPath,
                  t: f64,
                  a: &DMatrix<f64>,
                  ap: &DMatrix<f64>,
                  r: &DMatrix<f64>,
                  lambda: f64| {
        let inv = a
            .clone()
            .try_inverse()
            .expect("nonsingular away from conjugate points");
        out.motion.push(lambda);
        out.t.push(t);
        out.u.push(ap * inv);
        out.detlog.push(a.determinant().ln());
        out.ricci.push(r.trace());
        out.a.push(a.clone());
        out.a_prime.push(ap.clone());
    };
    record(&mut out, 0.0, &a, &ap, &curvature[0], lambda);
    for step in 0..total {
        let r0 = &curvature[2 * step];
        let rm = &curvature[2 * step + 1];
        let r1 = &curvature[2 * step + 2];
        let k1a = ap.clone();
        let k1p = -(r0 * &a);
        let a2 = &a + &k1a * (h / 2.0);
        let k2a = &ap + &k1p * (h / 2.0);
        let k2p = -(rm * &a2);
        let a3 = &a + &k2a * (h / 2.0);
        let k3a = &ap + &k2p * (h / 2.0);
        let k3p = -(rm * &a3);
        let a4 = &a + &k3a * h;
        let k4a = &ap + &k3p * h;
        let k4p = -(r1 * &a4);
        lambda += (u11(&a, &k1a) + 2.0 * u11(&a2, &k2a) + 2.0 * u11(&a3, &k3a) + u11(&a4, &k4a))
            * (h / 6.0);
        a += (&k1a + &k2a * 2.0 + &k3a * 2.0 + &k4a) * (h / 6.0);
        ap += (&k1p + &k2p * 2.0 + &k3p * 2.0 + &k4p) * (h / 6.0);
        let det = a.determinant();
        let t = (step + 1) as f64 * h;
        if !(det > 1e-12 * d0.abs()) {
            return Err(GeometryError::ConjugatePoint { t });
        }
        if (step + 1) % sub == 0 {
            record(&mut out, t, &a, &ap, r1, lambda);
        }
    }
    Ok(out)
}

/// `R_ab(t) = ⟨R(E_a, γ̇)γ̇, E_b⟩` at `n + 1` uniform times.
fn curvature_along(
    space: &ModelSpace,
    geo: &GeodesicPath,
    n: usize,
) -> Result<Vec<DMatrix<f64>>, GeometryError> {
    let dim = space.dim();
    let speed = geo.speed;
    match space.kind() {
        SpaceKind::Interval { .. } | SpaceKind::Circle { .. } | SpaceKind::FlatTorus2 { .. } => {
            Ok(vec![DMatrix::zeros(dim, dim); n + 1])
        }
        SpaceKind::Sphere2 { radius } => {
            let mut r = DMatrix::zeros(2, 2);
            r[(1, 1)] = speed * speed / (radius * radius);
            Ok(vec![r; n + 1])
        }
        SpaceKind::Warped(_) => warped_curvature_along(space, geo, n),
    }
}

/// Shoots geodesic and parallel frame together, then evaluates curvature.
fn warped_curvature_along(
    space: &ModelSpace,
    geo: &GeodesicPath,
    n: usize,
) -> Result<Vec<DMatrix<f64>>, GeometryError> {
    let dim = space.dim();
    let x0 = geo.start();
    let v0 = geo.initial_velocity();
    let frame0 = adapted_frame(space, &x0, &v0);
    // state: point, velocity, frame vectors
    let rhs = |p: &Vec3, q: &Vec3, e: &[Vec3]| -> (Vec3, Vec3, Vec<Vec3>) {
        let gamma = space.christoffel(p);
        let acc = Vec3::new(
            -q.dot(&(gamma[0] * q)),
            -q.dot(&(gamma[1] * q)),
            -q.dot(&(gamma[2] * q)),
        );
        let de = e
            .iter()
            .map(|ei| {
                Vec3::new(
                    -q.dot(&(gamma[0] * ei)),
                    -q.dot(&(gamma[1] * ei)),
                    -q.dot(&(gamma[2] * ei)),
                )
            })
            .collect();
        (*q, acc, de)
    };
    let h = 1.0 / n as f64;
    let mut p = x0;
    let mut q = v0;
    let mut e = frame0;
    let eval = |p: &Vec3, q: &Vec3, e: &[Vec3]| {
        let mut r = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                r[(a, b)] = space.curvature_form(p, &e[a], q, &e[b]);
            }
        }
        r
    };
    let mut out = vec![eval(&p, &q, &e)];
    let axpy = |e: &[Vec3], d: &[Vec3], s: f64| -> Vec<Vec3> {
        e.iter().zip(d).map(|(a, b)| a + b * s).collect()
    };
    for i in 0..n {
        let (k1x, k1v, k1e) = rhs(&p, &q, &e);
        let (k2x, k2v, k2e) = rhs(
            &(p + k1x * (h / 2.0)),
            &(q + k1v * (h / 2.0)),
            &axpy(&e, &k1e, h / 2.0),
        );
        let (k3x, k3v, k3e) = rhs(
            &(p + k2x * (h / 2.0)),
            &(q + k2v * (h / 2.0)),
            &axpy(&e, &k2e, h / 2.0),
        );
        let (k4x, k4v, k4e) = rhs(&(p + k3x * h), &(q + k3v * h), &axpy(&e, &k3e, h));
        p += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        q += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        for a in 0..dim {
            e[a] += (k1e[a] + k2e[a] * 2.0 + k3e[a] * 2.0 + k4e[a]) * (h / 6.0);
        }
        if !space.contains(&p) {
            return Err(GeometryError::LeavesChart {
                t: (i + 1) as f64 * h,
            });
        }
        out.push(eval(&p, &q, &e));
    }
    Ok(out)
}

/// Orthonormal frame at `x` whose first vector is `v/|v|` (any frame if `v = 0`).
pub fn adapted_frame(space: &ModelSpace, x: &Vec3, v: &Vec3) -> Vec<Vec3> {
    let basis = space.tangent_basis(x);
    let speed = space.norm(x, v);
    let mut frame: Vec<Vec3> = Vec::with_capacity(basis.len());
    let mut candidates = Vec::new();
    if speed > 0.0 {
        candidates.push(v / speed);
    }
    candidates.extend(basis.iter().copied());
    for c in candidates {
        let mut w = c;
        for f in &frame {
            w -= f * space.inner(x, &w, f);
        }
        let nw = space.norm(x, &w);
        if nw > 1e-8 {
            frame.push(w / nw);
        }
        if frame.len() == basis.len() {
            break;
        }
    }
    frame
}

fn linear_samples(x: &Vec3, v: &Vec3, times: &[f64]) -> Vec<GeodesicSample> {
    times
        .iter()
        .map(|&t| GeodesicSample {
            t,
            point: x + v * t,
            velocity: *v,
        })
        .collect()
}

/// `|x - y|` reduced modulo `period`.
pub fn periodic_gap(x: f64, y: f64, period: f64) -> f64 {
    signed_gap(x, y, period).abs()
}

/// Representative of `y - x` modulo `period` in `[-period/2, period/2)`.
pub fn signed_gap(x: f64, y: f64, period: f64) -> f64 {
    (y - x + 0.5 * period).rem_euclid(period) - 0.5 * period
}

pub fn angle_between(x: &Vec3, y: &Vec3) -> f64 {
    x.cross(y).norm().atan2(x.dot(y))
}

/// Point of the sphere of radius `radius` at polar angle and azimuth.
pub fn sphere_point(radius: f64, polar: f64, azimuth: f64) -> Vec3 {
    Vec3::new(
        radius * polar.sin() * azimuth.cos(),
        radius * polar.sin() * azimuth.sin(),
        radius * polar.cos(),
    )
}

/// Polar chart `(polar, azimuth)` of an embedded sphere point.
pub fn sphere_chart(p: &Vec3) -> (f64, f64) {
    let r = p.norm();
    let polar = (p[2] / r).clamp(-1.0, 1.0).acos();
    let azimuth = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    (polar, azimuth)
}

/// `n` points of the unit sphere on a Fibonacci lattice.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn fibonacci_hemisphere(n: usize) -> Vec<Vec3> {
    fibonacci_sphere(2 * n)
        .into_iter()
        .filter(|p| p[2] > 0.0)
        .take(n)
        .collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
