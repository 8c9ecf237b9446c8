//! Finite-sample verification of curvature-dimension conditions on concrete
//! transport instances, and of the Jacobi/Riccati inequalities along geodesics.
//!
//! Every inequality is oriented as `lhs ≤ rhs` and scored by the relative slack
//! `(rhs − lhs)/(1 + |lhs|)`. A verdict's margin is the worst slack.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::distortion::{Coefficient, Dimension, ExtendedReal};
use crate::fields::{line_integral_profile, lower_bound_scan, FieldSpec, RicciValue};
use crate::geometry::{jacobi_evolve, GeodesicPath, GeometryError, ModelSpace, SpaceKind};
use crate::grid::{Binning, Density1d, Grid1d};
use crate::par;
use crate::transport::{displacement_1d, DensityPath, DynamicalPlan, TransportError};

/// Tolerance for instances whose densities are exact (1-D monotone maps).
pub const EXACT_TOL: f64 = 1e-6;
/// Tolerance for binned densities.
pub const BINNED_TOL: f64 = 1e-3;
/// Worst samples kept per verdict.
const WITNESS_COUNT: usize = 5;

/// How the distortion coefficients are indexed; printed in every report.
pub const COEFFICIENT_READING: &str =
    "coefficients: (1-t) on the start term, (t) on the end term; K-convexity defect -K t(1-t) W2^2 / 2";

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("check needs a finite dimension parameter N >= 1, got {0}")]
    BadDimension(Dimension),
    #[error(
        "densities along geodesics are unavailable: the path is atomic and no binning was given"
    )]
    MissingDensities,
    #[error("pushforward mass lands outside the reference support")]
    NotAbsolutelyContinuous,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Cd,
    CdStar,
    CdInf,
    CdE,
    Pointwise,
    JacobiOde,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Cd => "CD",
            Condition::CdStar => "CD*",
            Condition::CdInf => "CD(K,inf)",
            Condition::CdE => "CDe",
            Condition::Pointwise => "pointwise",
            Condition::JacobiOde => "Jacobi",
        })
    }
}

/// One sampled instance of an inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub geodesic: Option<usize>,
    pub lhs: ExtendedReal,
    pub rhs: ExtendedReal,
    /// relative slack; `None` when an infinite coefficient meets a finite side
    pub margin: Option<f64>,
    pub label: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdVerdict {
    pub condition: Condition,
    pub k: f64,
    pub n: Dimension,
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub infinity_mismatch: bool,
    /// worst samples, most negative first
    pub witnesses: Vec<Witness>,
    pub samples: usize,
    pub reading: &'static str,
}

impl CdVerdict {
    /// Worst slack as a finite number even for infinity mismatches.
    pub fn signed_margin(&self) -> f64 {
        if self.infinity_mismatch {
            -1.0
        } else {
            self.margin
        }
    }
}

impl fmt::Display for CdVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} K={} N={}: {} margin={:.3e} tol={:.1e}",
            self.condition,
            self.k,
            self.n,
            if self.passed { "pass" } else { "FAIL" },
            self.margin,
            self.tolerance
        )?;
        if self.infinity_mismatch {
            write!(f, " (infinite coefficient against a finite side)")?;
        }
        Ok(())
    }
}

/// Running minimum of relative slacks.
#[derive(Clone, Debug)]
pub(crate) struct Tally {
    margin: f64,
    mismatch: bool,
    witnesses: Vec<Witness>,
    samples: usize,
}

impl Tally {
    pub(crate) fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            mismatch: false,
            witnesses: Vec::new(),
            samples: 0,
        }
    }

    pub(crate) fn push(
        &mut self,
        t: f64,
        geodesic: Option<usize>,
        lhs: ExtendedReal,
        rhs: ExtendedReal,
        label: &'static str,
    ) {
        self.samples += 1;
        let margin = match (lhs, rhs) {
            (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => Some((r - l) / (1.0 + l.abs())),
            (ExtendedReal::Infinite, ExtendedReal::Infinite)
            | (ExtendedReal::Finite(_), ExtendedReal::Infinite) => return,
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => None,
        };
        match margin {
            Some(m) if m.is_nan() => {
                self.margin = f64::NAN;
            }
            Some(m) => self.margin = self.margin.min(m),
            None => self.mismatch = true,
        }
        let w = Witness {
            t,
            geodesic,
            lhs,
            rhs,
            margin,
            label,
        };
        let key = |w: &Witness| w.margin.unwrap_or(f64::NEG_INFINITY);
        if self.witnesses.len() < WITNESS_COUNT || key(&w) < key(self.witnesses.last().unwrap()) {
            self.witnesses.push(w);
            self.witnesses.sort_by(|a, b| key(a).total_cmp(&key(b)));
            self.witnesses.truncate(WITNESS_COUNT);
        }
    }

    pub(crate) fn pushf(
        &mut self,
        t: f64,
        geodesic: Option<usize>,
        lhs: f64,
        rhs: f64,
        label: &'static str,
    ) {
        self.push(
            t,
            geodesic,
            ExtendedReal::Finite(lhs),
            ExtendedReal::Finite(rhs),
            label,
        );
    }

    pub(crate) fn merge(&mut self, other: Tally) {
        self.samples += other.samples;
        self.margin = if self.margin.is_nan() || other.margin.is_nan() {
            f64::NAN
        } else {
            self.margin.min(other.margin)
        };
        self.mismatch |= other.mismatch;
        self.witnesses.extend(other.witnesses);
        let key = |w: &Witness| w.margin.unwrap_or(f64::NEG_INFINITY);
        self.witnesses.sort_by(|a, b| key(a).total_cmp(&key(b)));
        self.witnesses.truncate(WITNESS_COUNT);
    }

    pub(crate) fn verdict(self, condition: Condition, k: f64, n: Dimension, tol: f64) -> CdVerdict {
        let margin = if self.margin == f64::INFINITY {
            0.0
        } else {
            self.margin
        };
        CdVerdict {
            condition,
            k,
            n,
            margin,
            tolerance: tol,
            passed: !self.mismatch && margin >= -tol,
            infinity_mismatch: self.mismatch,
            witnesses: self.witnesses,
            samples: self.samples,
            reading: COEFFICIENT_READING,
        }
    }
}

/// A transport instance with densities and line integrals tabulated along
/// every plan geodesic.
pub struct Instance<'a> {
    pub space: &'a ModelSpace,
    pub field: &'a FieldSpec,
    pub plan: &'a DynamicalPlan,
    pub path: &'a DensityPath,
    /// `φ_t(γ)` per geodesic and time
    pub phi: Vec<Vec<f64>>,
    /// `ρ_t(γ_t)` against the reference measure, per geodesic and time
    pub rho: Vec<Vec<f64>>,
    pub tolerance: f64,
}

impl<'a> Instance<'a> {
    /// Tabulates the instance. Densities come from the path's exact per-geodesic
    /// values when present, otherwise from `bins`.
    pub fn new(
        space: &'a ModelSpace,
        field: &'a FieldSpec,
        plan: &'a DynamicalPlan,
        path: &'a DensityPath,
        bins: Option<&dyn Binning>,
    ) -> Result<Self, CheckError> {
        let phi = plan.line_integrals(space, field);
        let (raw, tolerance) = match (&path.along, bins) {
            (Some(along), _) => (along.clone(), EXACT_TOL),
            (None, Some(bins)) => (binned_densities(plan, path, bins)?, BINNED_TOL),
            (None, None) => return Err(CheckError::MissingDensities),
        };
        let rho = plan
            .geodesics
            .iter()
            .zip(raw)
            .map(|(g, row)| {
                row.iter()
                    .zip(&plan.t_grid)
                    .map(|(r, &t)| r / space.weight_at(&space.wrap(&g.path.eval(t).0)))
                    .collect()
            })
            .collect();
        Ok(Self {
            space,
            field,
            plan,
            path,
            phi,
            rho,
            tolerance,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.plan.t_grid
    }

    pub fn w2_squared(&self) -> f64 {
        self.plan.w2_squared()
    }

    /// `Ent(μ_t) = ∫ log ρ_t(γ_t) dΠ`.
    pub fn entropy(&self, k: usize) -> f64 {
        self.plan
            .geodesics
            .iter()
            .zip(&self.rho)
            .map(|(g, r)| g.mass * r[k].ln())
            .sum()
    }

    /// `φ_t(Π) = ∫ φ_t(γ) dΠ`.
    pub fn mean_phi(&self, k: usize) -> f64 {
        self.plan
            .geodesics
            .iter()
            .zip(&self.phi)
            .map(|(g, p)| g.mass * p[k])
            .sum()
    }

    /// `g(t) = Ent(μ_t) − φ_t(Π)` on the time grid.
    pub fn free_energy(&self) -> Vec<f64> {
        (0..self.times().len())
            .map(|k| self.entropy(k) - self.mean_phi(k))
            .collect()
    }
}

fn binned_densities(
    plan: &DynamicalPlan,
    path: &DensityPath,
    bins: &dyn Binning,
) -> Result<Vec<Vec<f64>>, CheckError> {
    let mut out = vec![Vec::with_capacity(plan.t_grid.len()); plan.geodesics.len()];
    for (k, &t) in plan.t_grid.iter().enumerate() {
        let slice = &path.slices[k];
        let reference = slice
            .reference
            .as_ref()
            .ok_or(CheckError::MissingDensities)?;
        for (row, g) in out.iter_mut().zip(&plan.geodesics) {
            let cell = bins
                .cell_of(&g.path.eval(t).0)
                .ok_or(CheckError::NotAbsolutelyContinuous)?;
            let r = reference.weights[cell];
            if r <= 0.0 || slice.measure.weights[cell] <= 0.0 {
                return Err(CheckError::NotAbsolutelyContinuous);
            }
            row.push(slice.measure.weights[cell] / r);
        }
    }
    Ok(out)
}

fn finite_n(n: Dimension) -> Result<f64, CheckError> {
    match n {
        Dimension::Finite(v) if v >= 1.0 => Ok(v),
        _ => Err(CheckError::BadDimension(n)),
    }
}

/// `S^α_{N,t}(Π) ≤ −∫[c^{(1−t)}ρ_0^{−1/N} + c^{(t)} e^{φ_1/N} ρ_1^{−1/N}] dΠ` with
/// `c = τ` (CD) or `c = σ` (reduced, CD*), coefficients at `|γ̇|`.
pub fn check_cd_finite(
    inst: &Instance<'_>,
    k: f64,
    n: Dimension,
    reduced: bool,
) -> Result<CdVerdict, CheckError> {
    let nn = finite_n(n)?;
    let coeff = if reduced {
        Coefficient::Sigma
    } else {
        Coefficient::Tau
    };
    let last = inst.times().len() - 1;
    let mut tally = Tally::new();
    for (ki, &t) in inst.times().iter().enumerate() {
        let mut big = 0.0;
        let mut small = ExtendedReal::Finite(0.0);
        for (gi, g) in inst.plan.geodesics.iter().enumerate() {
            let rho = &inst.rho[gi];
            let phi = &inst.phi[gi];
            let theta = g.path.speed;
            big += g.mass * rho[ki].powf(-1.0 / nn) * (phi[ki] / nn).exp();
            let start = coeff
                .eval(1.0 - t, theta, k, nn)
                .scale(rho[0].powf(-1.0 / nn));
            let end = coeff
                .eval(t, theta, k, nn)
                .scale((phi[last] / nn).exp() * rho[last].powf(-1.0 / nn));
            small = small.add(start.add(end).scale(g.mass));
        }
        tally.push(t, None, small, ExtendedReal::Finite(big), "integrated");
    }
    let cond = if reduced {
        Condition::CdStar
    } else {
        Condition::Cd
    };
    Ok(tally.verdict(cond, k, n, inst.tolerance))
}

/// K-convexity of `t ↦ Ent(μ_t) − φ_t(Π)`: the endpoint chord at every interior
/// time and the three-point inequality on consecutive triples.
pub fn check_cd_inf(inst: &Instance<'_>, k: f64) -> CdVerdict {
    let g = inst.free_energy();
    let t = inst.times();
    let w2 = inst.w2_squared();
    let mut tally = Tally::new();
    let last = t.len() - 1;
    for i in 1..last {
        let s = t[i];
        tally.pushf(
            s,
            None,
            g[i],
            (1.0 - s) * g[0] + s * g[last] - 0.5 * k * s * (1.0 - s) * w2,
            "chord",
        );
    }
    for i in 1..last {
        let span = t[i + 1] - t[i - 1];
        let s = (t[i] - t[i - 1]) / span;
        let rhs = (1.0 - s) * g[i - 1] + s * g[i + 1] - 0.5 * k * s * (1.0 - s) * span * span * w2;
        tally.pushf(t[i], None, g[i], rhs, "three-point");
    }
    tally.verdict(Condition::CdInf, k, Dimension::Infinite, inst.tolerance)
}

/// `U_N(μ_t)e^{φ_t(Π)/N} ≥ σ^{(1−t)}(W₂)U_N(μ_0) + σ^{(t)}(W₂)e^{φ_1(Π)/N}U_N(μ_1)`.
pub fn check_cd_entropic(
    inst: &Instance<'_>,
    k: f64,
    n: Dimension,
) -> Result<CdVerdict, CheckError> {
    let nn = finite_n(n)?;
    let g = inst.free_energy();
    let theta = inst.w2_squared().sqrt();
    let last = g.len() - 1;
    let u = |x: f64| (-x / nn).exp();
    let mut tally = Tally::new();
    for (i, &t) in inst.times().iter().enumerate() {
        let small = Coefficient::Sigma
            .eval(1.0 - t, theta, k, nn)
            .scale(u(g[0]))
            .add(Coefficient::Sigma.eval(t, theta, k, nn).scale(u(g[last])));
        tally.push(t, None, small, ExtendedReal::Finite(u(g[i])), "entropic");
    }
    Ok(tally.verdict(Condition::CdE, k, n, inst.tolerance))
}

/// `[ρ_t(γ_t)e^{−φ_t(γ)}]^{−1/N} ≥ c^{(1−t)}ρ_0(γ_0)^{−1/N} + c^{(t)}[e^{−φ_1(γ)}ρ_1(γ_1)]^{−1/N}`
/// for every geodesic and time.
pub fn check_pointwise(
    inst: &Instance<'_>,
    k: f64,
    n: Dimension,
    use_tau: bool,
) -> Result<CdVerdict, CheckError> {
    let nn = finite_n(n)?;
    let coeff = if use_tau {
        Coefficient::Tau
    } else {
        Coefficient::Sigma
    };
    let last = inst.times().len() - 1;
    let rows = par::map(&(0..inst.plan.geodesics.len()).collect::<Vec<_>>(), |&gi| {
        let mut tally = Tally::new();
        let rho = &inst.rho[gi];
        let phi = &inst.phi[gi];
        let theta = inst.plan.geodesics[gi].path.speed;
        let start = rho[0].powf(-1.0 / nn);
        let end = (rho[last] * (-phi[last]).exp()).powf(-1.0 / nn);
        for (ki, &t) in inst.times().iter().enumerate() {
            let small = coeff
                .eval(1.0 - t, theta, k, nn)
                .scale(start)
                .add(coeff.eval(t, theta, k, nn).scale(end));
            let big = (rho[ki] * (-phi[ki]).exp()).powf(-1.0 / nn);
            tally.push(t, Some(gi), small, ExtendedReal::Finite(big), "pointwise");
        }
        tally
    });
    let mut tally = Tally::new();
    for r in rows {
        tally.merge(r);
    }
    Ok(tally.verdict(Condition::Pointwise, k, n, inst.tolerance))
}

/// Tolerance for the Jacobi checks, dominated by the RK4 error.
pub const JACOBI_TOL: f64 = 1e-7;

/// Inequalities for `𝓘_t = det 𝒜_t · e^{φ_t}` along one geodesic:
///
/// * `𝓘^{1/N}` is σ_{K,N}-concave (finite N), or `log 𝓘` is K|γ̇|²-concave (N = ∞);
/// * with `L = e^{λ}`, `λ = ∫u_11`: `L''/L = −Σ_{j≥2} u_1j u_j1 ≤ 0`;
/// * `(𝓘/L)^{1/(N−1)}` is σ_{K,N−1}-concave (N > 1);
/// * `𝓘^{1/N}` dominates the τ-combination (N > 1).
///
/// `a0`, `a0_prime` are given in the adapted frame whose first vector is `γ̇`.
pub fn check_jacobi_ode(
    space: &ModelSpace,
    geo: &GeodesicPath,
    field: &FieldSpec,
    k: f64,
    n: Dimension,
    a0: &DMatrix<f64>,
    a0_prime: &DMatrix<f64>,
) -> Result<CdVerdict, CheckError> {
    let jp = jacobi_evolve(space, geo, a0, a0_prime)?;
    let phi = line_integral_profile(space, geo, field, &jp.t);
    let log_i: Vec<f64> = jp.detlog.iter().zip(&phi).map(|(y, p)| y + p).collect();
    let theta = geo.speed;
    let last = jp.t.len() - 1;
    let mut tally = Tally::new();
    match n {
        Dimension::Infinite => {
            for (i, &t) in jp.t.iter().enumerate() {
                let chord = (1.0 - t) * log_i[0]
                    + t * log_i[last]
                    + 0.5 * k * t * (1.0 - t) * theta * theta;
                tally.pushf(t, None, chord, log_i[i], "log-concavity");
            }
        }
        Dimension::Finite(nn) => {
            if nn < 1.0 {
                return Err(CheckError::BadDimension(n));
            }
            let pw = |x: f64, e: f64| (x / e).exp();
            for (i, &t) in jp.t.iter().enumerate() {
                for (coeff, label) in [(Coefficient::Sigma, "sigma"), (Coefficient::Tau, "tau")] {
                    if coeff == Coefficient::Tau && nn <= 1.0 {
                        continue;
                    }
                    let small = coeff
                        .eval(1.0 - t, theta, k, nn)
                        .scale(pw(log_i[0], nn))
                        .add(coeff.eval(t, theta, k, nn).scale(pw(log_i[last], nn)));
                    tally.push(
                        t,
                        None,
                        small,
                        ExtendedReal::Finite(pw(log_i[i], nn)),
                        label,
                    );
                }
            }
            let lambda = jp.motion_log();
            for (i, &t) in jp.t.iter().enumerate() {
                let u = &jp.u[i];
                let curv: f64 = (1..u.nrows()).map(|j| -u[(0, j)] * u[(j, 0)]).sum();
                tally.pushf(t, None, curv, 0.0, "motion concavity");
            }
            if nn > 1.0 {
                let bar: Vec<f64> = log_i.iter().zip(&lambda).map(|(l, m)| l - m).collect();
                let e = nn - 1.0;
                for (i, &t) in jp.t.iter().enumerate() {
                    let small = Coefficient::Sigma
                        .eval(1.0 - t, theta, k, e)
                        .scale(pw(bar[0], e))
                        .add(
                            Coefficient::Sigma
                                .eval(t, theta, k, e)
                                .scale(pw(bar[last], e)),
                        );
                    tally.push(
                        t,
                        None,
                        small,
                        ExtendedReal::Finite(pw(bar[i], e)),
                        "transversal",
                    );
                }
            }
        }
    }
    Ok(tally.verdict(Condition::JacobiOde, k, n, JACOBI_TOL))
}

/// Result of [`counterexample_scan`].
#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub verdict: CdVerdict,
    pub trials_run: usize,
    /// `(point, velocity, λ)` of the worst trial
    pub worst_trial: Option<(crate::Vec3, crate::Vec3, f64)>,
}

impl CounterexampleReport {
    pub fn found_witness(&self) -> bool {
        !self.verdict.passed
    }
}

const TRIAL_SPEEDS: [f64; 4] = [0.3, 0.6, 1.0, 0.15];
const TRIAL_HESSIANS: [f64; 3] = [0.0, 0.5, -0.5];

/// Searches for a violation of the σ-inequality for `𝓘` near the worst samples
/// of the Bakry-Émery scan, using the transport `T_t(y) = exp_y(−t∇ψ)` of a
/// quadratic potential with `∇ψ(x) = −v` and `∇²ψ(x) = λI`.
///
/// Stops at the first failing trial.
pub fn counterexample_scan(
    space: &ModelSpace,
    field: &FieldSpec,
    k: f64,
    n: Dimension,
    n_trials: usize,
) -> CounterexampleReport {
    let report = lower_bound_scan(space, field, n, 48, 8);
    let mut samples: Vec<_> = report
        .samples
        .iter()
        .filter_map(|s| match s.value {
            RicciValue::Finite(v) => Some((v, s.point, s.direction)),
            RicciValue::MinusInfinity => Some((f64::NEG_INFINITY, s.point, s.direction)),
        })
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dim = space.dim();
    let per_point = TRIAL_SPEEDS.len() * (TRIAL_HESSIANS.len() + 1);
    let mut worst: Option<(CdVerdict, (crate::Vec3, crate::Vec3, f64))> = None;
    let mut run = 0;
    'outer: for (_, x, dir) in samples.iter() {
        let zv = space.inner(x, &field.eval(x), dir);
        let tuned = match n {
            Dimension::Finite(nn) if nn > dim as f64 => Some(-zv / (nn - dim as f64)),
            _ => None,
        };
        for idx in 0..per_point {
            if run >= n_trials {
                break 'outer;
            }
            run += 1;
            let speed = TRIAL_SPEEDS[idx % TRIAL_SPEEDS.len()];
            let lam_unit = match idx / TRIAL_SPEEDS.len() {
                j if j < TRIAL_HESSIANS.len() => TRIAL_HESSIANS[j],
                _ => match tuned {
                    Some(l) => l,
                    None => continue,
                },
            };
            let v = dir * speed;
            let Ok(geo) = space.geodesic_shoot(x, &v, 64) else {
                continue;
            };
            let a0 = DMatrix::identity(dim, dim);
            let a0p = DMatrix::identity(dim, dim) * (-lam_unit * speed);
            let Ok(verdict) = check_jacobi_ode(space, &geo, field, k, n, &a0, &a0p) else {
                continue;
            };
            let better = worst
                .as_ref()
                .is_none_or(|(w, _)| verdict.signed_margin() < w.signed_margin());
            let failed = !verdict.passed;
            if better {
                worst = Some((verdict, (*x, v, lam_unit * speed)));
            }
            if failed {
                break 'outer;
            }
        }
    }
    match worst {
        Some((verdict, trial)) => CounterexampleReport {
            verdict,
            trials_run: run,
            worst_trial: Some(trial),
        },
        None => CounterexampleReport {
            verdict: Tally::new().verdict(Condition::JacobiOde, k, n, JACOBI_TOL),
            trials_run: run,
            worst_trial: None,
        },
    }
}

/// Two densities on a 1-D model with a drift: the standard instance for the
/// integrated checks.
#[derive(Clone, Debug)]
pub struct LineInstance {
    pub space: ModelSpace,
    pub field: FieldSpec,
    pub mu0: Density1d,
    pub mu1: Density1d,
}

/// All integrated verdicts of one line instance.
#[derive(Clone, Debug)]
pub struct LineVerdicts {
    pub cd_star: Option<CdVerdict>,
    pub pointwise: Option<CdVerdict>,
    pub entropic: Option<CdVerdict>,
    pub cd_inf: CdVerdict,
}

impl LineInstance {
    pub fn new(space: ModelSpace, field: FieldSpec, mu0: Density1d, mu1: Density1d) -> Self {
        Self {
            space,
            field,
            mu0,
            mu1,
        }
    }

    pub fn displacement(&self, n_t: usize) -> Result<(DynamicalPlan, DensityPath), CheckError> {
        Ok(displacement_1d(&self.space, &self.mu0, &self.mu1, n_t)?)
    }

    /// Runs CD*, pointwise σ and CDᵉ (finite `n`) and CD(K,∞).
    pub fn verdicts(&self, k: f64, n: Dimension, n_t: usize) -> Result<LineVerdicts, CheckError> {
        let (plan, path) = self.displacement(n_t)?;
        let inst = Instance::new(&self.space, &self.field, &plan, &path, None)?;
        let finite = !n.is_infinite();
        Ok(LineVerdicts {
            cd_star: if finite {
                Some(check_cd_finite(&inst, k, n, true)?)
            } else {
                None
            },
            pointwise: if finite {
                Some(check_pointwise(&inst, k, n, false)?)
            } else {
                None
            },
            entropic: if finite {
                Some(check_cd_entropic(&inst, k, n)?)
            } else {
                None
            },
            cd_inf: check_cd_inf(&inst, k),
        })
    }

    /// Distances scaled by `eta` and the reference measure by `beta`.
    ///
    /// The drift transforms so that its potential is unchanged as a function on
    /// the space: `Z'(x') = Z(x'/η)/η`.
    pub fn scaled(&self, eta: f64, beta: f64) -> Self {
        let space = match self.space.kind() {
            SpaceKind::Interval { lo, hi } => ModelSpace::interval(eta * lo, eta * hi),
            SpaceKind::Circle { circumference } => ModelSpace::circle(eta * circumference),
            _ => panic!("line instances live on an interval or circle"),
        };
        let base_weight = self.space.clone();
        let space = space.with_weight(std::sync::Arc::new(move |p: &crate::Vec3| {
            beta * base_weight.weight_at(&(p / eta))
        }));
        let grid = |g: &Grid1d| Grid1d::new(eta * g.lo, eta * g.hi, g.cells, g.periodic);
        let f = self.field.clone();
        let f2 = self.field.clone();
        let mut field = FieldSpec::new(
            format!("{}@{eta}", self.field.name()),
            std::sync::Arc::new(move |p: &crate::Vec3| f.eval(&(p / eta)) / eta),
        );
        if self.field.jacobian(&crate::Vec3::zeros()).is_some() {
            field = field.with_jacobian(std::sync::Arc::new(move |p: &crate::Vec3| {
                f2.jacobian(&(p / eta)).expect("jacobian present") / (eta * eta)
            }));
        }
        Self {
            space,
            field,
            mu0: Density1d {
                grid: grid(&self.mu0.grid),
                mass: self.mu0.mass.clone(),
            },
            mu1: Density1d {
                grid: grid(&self.mu1.grid),
                mass: self.mu1.mass.clone(),
            },
        }
    }

    /// Restriction to the grid cells `first..last` of an interval instance; the
    /// densities must vanish outside.
    pub fn restricted(&self, first: usize, last: usize) -> Option<Self> {
        let g = &self.mu0.grid;
        if g.periodic || first >= last || last > g.cells {
            return None;
        }
        let outside = |d: &Density1d| {
            d.mass[..first]
                .iter()
                .chain(&d.mass[last..])
                .any(|&m| m > 0.0)
        };
        if outside(&self.mu0) || outside(&self.mu1) {
            return None;
        }
        let grid = Grid1d::new(g.edge(first), g.edge(last), last - first, false);
        let space = ModelSpace::interval(grid.lo, grid.hi);
        let space = if self.space.is_weighted() {
            let w = self.space.clone();
            space.with_weight(std::sync::Arc::new(move |p: &crate::Vec3| w.weight_at(p)))
        } else {
            space
        };
        Some(Self {
            space,
            field: self.field.clone(),
            mu0: Density1d {
                grid: grid.clone(),
                mass: self.mu0.mass[first..last].to_vec(),
            },
            mu1: Density1d {
                grid,
                mass: self.mu1.mass[first..last].to_vec(),
            },
        })
    }
}
