//! `N`-warped products `B ×_f^N F` over a 1-D base, the lifted drift
//! `Z♭ = f⁻²Z`, their Bakry-Émery tensor, and the round example with a
//! rotational drift on the fiber sphere.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::comparison::{bonnet_myers_check, ComparisonError, ComparisonVerdict};
use crate::distortion::Dimension;
use crate::fields::{
    bakry_emery_form, lower_bound_scan, scan_form, symmetric_derivative, FieldSpec, RicciValue,
};
use crate::geometry::{
    sphere_chart, sphere_point, Fiber, ModelSpace, Vec3, WarpFunction, WarpedChart,
};
use crate::par;

/// Tolerance on the sampled curvature inequality.
pub const WARPED_TOL: f64 = 1e-6;
const CONDITION_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const DIRECTIONS_PER_POINT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WarpedError {
    #[error("warp function is not positive at r = {r} (f = {value})")]
    DegenerateWarp { r: f64, value: f64 },
    #[error("condition {condition} fails at r = {r}: residual {residual:.3e}")]
    ConditionViolated {
        condition: &'static str,
        r: f64,
        residual: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
}

/// Data of `B ×_f^N F`: base interval, warp, fiber, the dimension parameter
/// `N` of the measure `vol_B ⊗ f^N vol_F`, and a drift on the fiber.
///
/// `fiber_field` lives on the fiber as a model space: embedded vectors for a
/// sphere fiber, the angular component for a circle fiber.
#[derive(Clone, Debug)]
pub struct WarpedSpec {
    pub base: (f64, f64),
    pub warp: WarpFunction,
    pub fiber: Fiber,
    pub n: f64,
    pub fiber_field: FieldSpec,
}

/// The product chart `(r, u₁, u₂)` in two equivalent descriptions:
/// `(weighted, lifted)` carries the measure `𝔪^N_f` and the drift `Z♭`;
/// `(space, effective)` uses Riemannian volume and folds `(N − k)∇log f` into
/// the drift, which is the form the Bakry-Émery tensor reads.
#[derive(Clone, Debug)]
pub struct WarpedBundle {
    pub space: ModelSpace,
    pub weighted: ModelSpace,
    pub lifted: FieldSpec,
    pub effective: FieldSpec,
    /// the tensor dimension `N + 1`
    pub dimension: f64,
}

/// Embedded point and coordinate frame of the fiber at chart coordinates `u`.
fn fiber_frame(fiber: &Fiber, u: [f64; 2]) -> (Vec3, [Vec3; 2]) {
    match *fiber {
        Fiber::Circle { .. } => (Vec3::new(u[0], 0.0, 0.0), [Vec3::x(), Vec3::zeros()]),
        Fiber::Sphere2 { radius } => {
            let (a, b) = (u[0], u[1]);
            let e_a = Vec3::new(a.cos() * b.cos(), a.cos() * b.sin(), -a.sin()) * radius;
            let e_b = Vec3::new(-a.sin() * b.sin(), a.sin() * b.cos(), 0.0) * radius;
            (sphere_point(radius, a, b), [e_a, e_b])
        }
    }
}

/// Fiber-chart components of the fiber drift.
fn fiber_components(fiber: &Fiber, field: &FieldSpec, u: [f64; 2]) -> [f64; 2] {
    let (p, [e_a, e_b]) = fiber_frame(fiber, u);
    let z = field.eval(&p);
    match *fiber {
        Fiber::Circle { .. } => [z[0], 0.0],
        Fiber::Sphere2 { .. } => [
            z.dot(&e_a) / e_a.norm_squared(),
            z.dot(&e_b) / e_b.norm_squared(),
        ],
    }
}

/// Embedded fiber vector of the fiber-chart components of `w`.
fn fiber_vector(fiber: &Fiber, p: &Vec3, w: &Vec3) -> (Vec3, Vec3) {
    let (q, [e_a, e_b]) = fiber_frame(fiber, [p[1], p[2]]);
    (q, e_a * w[1] + e_b * w[2])
}

fn check_warp(spec: &WarpedSpec) -> Result<(), WarpedError> {
    let (lo, hi) = spec.base;
    if !(hi > lo) {
        return Err(WarpedError::InvalidParameter(format!(
            "empty base ({lo}, {hi})"
        )));
    }
    if !(spec.n >= 1.0) {
        return Err(WarpedError::InvalidParameter(format!(
            "N must be at least 1, got {}",
            spec.n
        )));
    }
    for i in 1..1000 {
        let r = lo + (hi - lo) * i as f64 / 1000.0;
        let [f, df, ddf] = spec.warp.eval(r);
        if !(f > 0.0) || !df.is_finite() || !ddf.is_finite() {
            return Err(WarpedError::DegenerateWarp { r, value: f });
        }
    }
    Ok(())
}

/// Builds the product chart with its measure and both drift descriptions.
pub fn build_warped(spec: &WarpedSpec) -> Result<WarpedBundle, WarpedError> {
    check_warp(spec)?;
    let chart = WarpedChart {
        base: spec.base,
        warp: spec.warp.clone(),
        fiber: spec.fiber,
    };
    let space = ModelSpace::warped(chart);
    let k = spec.fiber.dim() as f64;
    let n = spec.n;
    let warp = spec.warp.clone();
    let weighted = space
        .clone()
        .with_weight(Arc::new(move |p: &Vec3| warp.eval(p[0])[0].powf(n - k)));

    let lifted = lifted_field(spec, 0.0);
    let effective = lifted_field(spec, n - k);
    Ok(WarpedBundle {
        space,
        weighted,
        lifted,
        effective,
        dimension: n + 1.0,
    })
}

/// `f⁻²Z + c (f'/f) ∂_r` in chart components, with the radial derivatives in
/// closed form and the fiber derivatives by central differences.
fn lifted_field(spec: &WarpedSpec, c: f64) -> FieldSpec {
    let fiber = spec.fiber;
    let warp = spec.warp.clone();
    let field = spec.fiber_field.clone();
    let eval = {
        let warp = warp.clone();
        let field = field.clone();
        move |p: &Vec3| {
            let [f, df, _] = warp.eval(p[0]);
            let z = fiber_components(&fiber, &field, [p[1], p[2]]);
            Vec3::new(c * df / f, z[0] / (f * f), z[1] / (f * f))
        }
    };
    let jac = {
        let warp = warp.clone();
        let field = field.clone();
        move |p: &Vec3| {
            let [f, df, ddf] = warp.eval(p[0]);
            let z = fiber_components(&fiber, &field, [p[1], p[2]]);
            let mut m = Matrix3::zeros();
            m[(0, 0)] = c * (ddf * f - df * df) / (f * f);
            m[(1, 0)] = -2.0 * df / (f * f * f) * z[0];
            m[(2, 0)] = -2.0 * df / (f * f * f) * z[1];
            for j in 0..fiber.dim() {
                let mut up = [p[1], p[2]];
                let mut dn = up;
                up[j] += FD_STEP;
                dn[j] -= FD_STEP;
                let zu = fiber_components(&fiber, &field, up);
                let zd = fiber_components(&fiber, &field, dn);
                for i in 0..fiber.dim() {
                    m[(i + 1, j + 1)] = (zu[i] - zd[i]) / (2.0 * FD_STEP * f * f);
                }
            }
            m
        }
    };
    let name = if c == 0.0 {
        format!("lifted {}", field.name())
    } else {
        format!("lifted {} + {c} dlog f", field.name())
    };
    FieldSpec::new(name, Arc::new(eval)).with_jacobian(Arc::new(jac))
}

/// Residual of one of the three structural conditions; nonpositive means it holds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResidual {
    pub condition: &'static str,
    pub worst_r: f64,
    pub residual: f64,
}

/// Outcome of [`warped_ricci_check`].
#[derive(Clone, Debug)]
pub struct WarpedVerdict {
    pub k: f64,
    pub k_fiber: f64,
    pub conditions: Vec<ConditionResidual>,
    /// the zero-set dependent reformulation of the third condition
    pub alternative_reading: bool,
    /// scanned `inf ric^N_{F,Z}(v)/|v|²_F`
    pub fiber_inf: RicciValue,
    /// `ric^N_{F,Z} ≥ (N−1)K_F` on the fiber scan
    pub fiber_hypothesis: bool,
    /// min over samples of `(formula − (N+d−1)K|w|²)/(1 + (N+d−1)K|w|²)`
    pub margin: f64,
    /// max difference between the displayed formula and the direct tensor
    pub formula_gap: f64,
    pub samples: usize,
    pub worst_sample: (Vec3, Vec3),
    pub passed: bool,
}

impl fmt::Display for WarpedVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.fiber_hypothesis) {
            (true, true) => "PASS",
            (_, false) => "VACUOUS (fiber bound unmet)",
            (false, true) => "FAIL",
        };
        write!(
            f,
            "{status} warped product, K = {}, K_F = {}: margin {:+.3e} over {} samples, formula vs direct {:.1e}",
            self.k, self.k_fiber, self.margin, self.samples, self.formula_gap
        )
    }
}

fn base_grid(spec: &WarpedSpec) -> Vec<f64> {
    let (lo, hi) = spec.base;
    (1..400)
        .map(|i| lo + (hi - lo) * i as f64 / 400.0)
        .collect()
}

/// Residuals of `ric_B ≥ (d−1)K`, `f'' + Kf ≤ 0` and `f'² + Kf² ≤ K_F` on a base grid.
pub fn structural_conditions(spec: &WarpedSpec, k: f64, k_fiber: f64) -> Vec<ConditionResidual> {
    let grid = base_grid(spec);
    let worst = |name: &'static str, g: &dyn Fn(f64) -> f64| {
        let mut out = ConditionResidual {
            condition: name,
            worst_r: grid[0],
            residual: f64::NEG_INFINITY,
        };
        for &r in &grid {
            let v = g(r);
            if v > out.residual {
                out = ConditionResidual {
                    condition: name,
                    worst_r: r,
                    residual: v,
                };
            }
        }
        out
    };
    vec![
        // a 1-D base has no Ricci curvature and d − 1 = 0
        ConditionResidual {
            condition: "base curvature",
            worst_r: grid[0],
            residual: 0.0,
        },
        worst("warp concavity", &|r| {
            let [f, _, ddf] = spec.warp.eval(r);
            ddf + k * f
        }),
        worst("warp gradient", &|r| {
            let [f, df, _] = spec.warp.eval(r);
            df * df + k * f * f - k_fiber
        }),
    ]
}

/// The reformulation of the gradient condition: `K_F ≥ f²K` when `f` has no
/// zeros on the closed base, `K_F > 0` and `|f'| ≤ √K_F` otherwise.
pub fn alternative_gradient_reading(spec: &WarpedSpec, k: f64, k_fiber: f64) -> bool {
    let (lo, hi) = spec.base;
    let vanishes = [lo, hi].iter().any(|&r| spec.warp.eval(r)[0].abs() < 1e-12);
    let grid = base_grid(spec);
    if vanishes {
        k_fiber > 0.0
            && grid
                .iter()
                .all(|&r| spec.warp.eval(r)[1].abs() <= k_fiber.sqrt() + CONDITION_TOL)
    } else {
        grid.iter()
            .all(|&r| k_fiber >= spec.warp.eval(r)[0].powi(2) * k - CONDITION_TOL)
    }
}

/// The displayed tensor: `−N f''/f ξ² + ric^N_{F,Z}(v) − [f''/f + (N−1)f'²/f²]|v|²_C`.
pub fn warped_formula(spec: &WarpedSpec, p: &Vec3, w: &Vec3) -> RicciValue {
    let [f, df, ddf] = spec.warp.eval(p[0]);
    let n = spec.n;
    let fiber_space = spec.fiber.as_space();
    let (q, v) = fiber_vector(&spec.fiber, p, w);
    let fiber_sq = fiber_space.inner(&q, &v, &v);
    let ric_f = bakry_emery_form(
        &fiber_space,
        &spec.fiber_field,
        Dimension::Finite(n),
        &q,
        &v,
    );
    let rest =
        -n * ddf / f * w[0] * w[0] - (ddf / f + (n - 1.0) * df * df / (f * f)) * f * f * fiber_sq;
    match ric_f {
        RicciValue::Finite(x) => RicciValue::Finite(x + rest),
        RicciValue::MinusInfinity if fiber_sq > 0.0 => RicciValue::MinusInfinity,
        RicciValue::MinusInfinity => RicciValue::Finite(rest),
    }
}

/// Checks the structural conditions, scans the fiber for
/// `ric^N_{F,Z} ≥ (N−1)K_F`, and evaluates the displayed tensor against
/// `N K |w|²` on `n_points` chart points times a direction fan, cross-checked
/// against the Bakry-Émery tensor of the chart with the effective drift.
///
/// A failing structural condition is an error; an unmet fiber bound makes the
/// verdict vacuous but the sampled margin is still reported.
pub fn warped_ricci_check(
    spec: &WarpedSpec,
    k: f64,
    k_fiber: f64,
    n_points: usize,
) -> Result<WarpedVerdict, WarpedError> {
    let bundle = build_warped(spec)?;
    let conditions = structural_conditions(spec, k, k_fiber);
    if let Some(c) = conditions.iter().find(|c| c.residual > CONDITION_TOL) {
        return Err(WarpedError::ConditionViolated {
            condition: c.condition,
            r: c.worst_r,
            residual: c.residual,
        });
    }
    let alternative_reading = alternative_gradient_reading(spec, k, k_fiber);

    let fiber_space = spec.fiber.as_space();
    let fiber_scan = lower_bound_scan(
        &fiber_space,
        &spec.fiber_field,
        Dimension::Finite(spec.n),
        200,
        16,
    );
    let fiber_hypothesis = fiber_scan.certifies((spec.n - 1.0) * k_fiber, 1e-9);

    let d = 1.0;
    let target = (spec.n + d - 1.0) * k;
    let points = bundle.space.sample_points(n_points);
    let rows = par::map(&points, |p| {
        let mut worst = (f64::INFINITY, Vec3::zeros());
        let mut gap: f64 = 0.0;
        for w in bundle.space.unit_directions(p, DIRECTIONS_PER_POINT) {
            let norm_sq = bundle.space.inner(p, &w, &w);
            let formula = warped_formula(spec, p, &w);
            let direct = bakry_emery_form(
                &bundle.space,
                &bundle.effective,
                Dimension::Finite(bundle.dimension),
                p,
                &w,
            );
            let m = match formula {
                RicciValue::Finite(x) => {
                    if let RicciValue::Finite(y) = direct {
                        gap = gap.max((x - y).abs());
                    } else {
                        gap = f64::INFINITY;
                    }
                    let rhs = target * norm_sq;
                    (x - rhs) / (1.0 + rhs.abs())
                }
                RicciValue::MinusInfinity => f64::NEG_INFINITY,
            };
            if m < worst.0 {
                worst = (m, w);
            }
        }
        (worst, gap)
    });
    let mut margin = f64::INFINITY;
    let mut worst_sample = (Vec3::zeros(), Vec3::zeros());
    let mut formula_gap: f64 = 0.0;
    for (p, ((m, w), gap)) in points.iter().zip(rows) {
        formula_gap = formula_gap.max(gap);
        if m < margin {
            margin = m;
            worst_sample = (*p, w);
        }
    }
    let samples = points.len() * DIRECTIONS_PER_POINT;
    Ok(WarpedVerdict {
        k,
        k_fiber,
        conditions,
        alternative_reading,
        fiber_inf: fiber_scan.inf_estimate,
        fiber_hypothesis,
        margin,
        formula_gap,
        samples,
        worst_sample,
        passed: fiber_hypothesis && margin >= -WARPED_TOL,
    })
}

/// `κ = sup_{|v|=1} ∇ˢZ(v,v) + ⟨Z,v⟩²`: a scan of the unit sphere, then a
/// compass search in (polar, azimuth, direction angle) from the best sample.
pub fn drift_constant(field: &FieldSpec) -> f64 {
    let sphere = ModelSpace::sphere2(1.0);
    let value = |x: &Vec3, v: &Vec3| {
        let zv = sphere.inner(x, &field.eval(x), v);
        symmetric_derivative(&sphere, field, x, v) + zv * zv
    };
    let report = scan_form(&sphere, 400, 16, |x, v| RicciValue::Finite(-value(x, v)));
    let at = |c: [f64; 3]| {
        let (x, [e_a, e_b]) = fiber_frame(&Fiber::Sphere2 { radius: 1.0 }, [c[0], c[1]]);
        if e_b.norm() < 1e-9 {
            return f64::NEG_INFINITY;
        }
        value(
            &x,
            &(e_a.normalize() * c[2].cos() + e_b.normalize() * c[2].sin()),
        )
    };
    let (polar, azimuth) = sphere_chart(&report.worst_point);
    let (_, [e_a, e_b]) = fiber_frame(&Fiber::Sphere2 { radius: 1.0 }, [polar, azimuth]);
    let v = report.worst_direction;
    let mut c = [
        polar,
        azimuth,
        v.dot(&e_b.normalize()).atan2(v.dot(&e_a.normalize())),
    ];
    let mut best = at(c).max(-report.inf_estimate.finite().expect("finite form"));
    let mut step = 0.05;
    while step > 1e-9 {
        let mut moved = false;
        for i in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut trial = c;
                trial[i] += sign * step;
                let val = at(trial);
                if val > best {
                    best = val;
                    c = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// The round example with a rotational drift on the fiber sphere.
#[derive(Clone, Debug)]
pub struct SphereExample {
    pub n: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub k_fiber: f64,
    pub spec: WarpedSpec,
    pub bundle: WarpedBundle,
    /// scanned `inf ric^N_{F,αZ}` over unit fiber vectors
    pub fiber_inf: f64,
    pub warped: WarpedVerdict,
    pub diameter: ComparisonVerdict,
}

impl SphereExample {
    pub fn passed(&self) -> bool {
        self.fiber_inf >= 0.5 - 1e-9
            && self.warped.passed
            && self.diameter.passed
            && self.diameter.hypothesis_met
    }
}

/// Fiber bound constant making `ric^N_{F,αZ} ≥ ½` read as `(N−1)K_F`.
pub fn fiber_constant(n: f64) -> f64 {
    1.0 / (2.0 * (n - 1.0))
}

/// `[0, π] ×_f^N S²` with `f = √K_F sin` and fiber drift `α` times the unit
/// rotation about the polar axis; certifies `CD(N, N+1)` on samples and the
/// attained diameter bound `π`.
pub fn sphere_example(
    n: f64,
    alpha: f64,
    k_fiber: Option<f64>,
    n_points: usize,
) -> Result<SphereExample, WarpedError> {
    // N = 2 only without drift, where the fiber tensor at N = dim F is defined
    if !(n >= 2.0) || !(alpha >= 0.0) || (n == 2.0 && alpha > 0.0) {
        return Err(WarpedError::InvalidParameter(format!(
            "need N > 2 (or N = 2 with α = 0) and α ≥ 0, got N = {n}, α = {alpha}"
        )));
    }
    let rotation = FieldSpec::rotation(1.0);
    let kappa = drift_constant(&rotation);
    if alpha * kappa > 0.5 + 1e-12 {
        return Err(WarpedError::InvalidParameter(format!(
            "ακ = {} exceeds 1/2",
            alpha * kappa
        )));
    }
    if alpha > n - 2.0 {
        return Err(WarpedError::InvalidParameter(format!(
            "α = {alpha} exceeds N − 2 = {}",
            n - 2.0
        )));
    }
    let k_fiber = k_fiber.unwrap_or_else(|| fiber_constant(n));
    let field = FieldSpec::rotation(alpha);
    let sphere = ModelSpace::sphere2(1.0);
    let fiber_inf = lower_bound_scan(&sphere, &field, Dimension::Finite(n), 400, 16)
        .inf_estimate
        .finite()
        .unwrap_or(f64::NEG_INFINITY);
    let spec = WarpedSpec {
        base: (0.0, PI),
        warp: WarpFunction::ScaledSine(k_fiber.sqrt()),
        fiber: Fiber::Sphere2 { radius: 1.0 },
        n,
        fiber_field: field,
    };
    let bundle = build_warped(&spec)?;
    let warped = warped_ricci_check(&spec, 1.0, k_fiber, n_points)?;
    let diameter = bonnet_myers_check(&bundle.space, &bundle.effective, n, n + 1.0)?;
    Ok(SphereExample {
        n,
        alpha,
        kappa,
        k_fiber,
        spec,
        bundle,
        fiber_inf,
        warped,
        diameter,
    })
}
